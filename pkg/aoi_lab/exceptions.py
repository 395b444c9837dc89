#
# Copyright (c) 2019 The aoi_lab authors
# All rights reserved.
#
# Distributed under the BSD 3-Clause License. See LICENSE for details.
#


class AoiLabException(Exception):
    """
    Exception used as based exception for other exceptions defined in this package.
    """

    def __init__(self, msg, error_code=None):
        super(AoiLabException, self).__init__(msg)
        self.msg = msg
        self.error_code = error_code


class InvalidArgumentException(AoiLabException):
    """
    Exception used when an argument is outside its valid range or of wrong type
    """

    pass


class MissingArgumentException(AoiLabException):
    """
    Exception used when a required argument is missing
    """

    pass


class IllegalStateException(AoiLabException):
    """
    Exception used when a computed result breaks one of its own identities
    """

    pass


class ConfigException(AoiLabException):
    """
    Exception used for malformed configuration files and flags.
    The offending key is kept in `key`.
    """

    def __init__(self, msg, key=None):
        super(ConfigException, self).__init__(msg)
        self.key = key


class ValidationFailure(AoiLabException):
    """
    Exception used when an invariant or a golden comparison does not hold
    """

    pass
