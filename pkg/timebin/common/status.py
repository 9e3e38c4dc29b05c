# coding: utf8

######################################################################
# Copyright 2016, 2021 John J. Rofrano. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
######################################################################

"""
Descriptive status codes, for improved code readability

HTTP codes of the JSON service (RFC 2616) and exit codes of the
command line
"""

# Successful - 2xx
HTTP_200_OK = 200

# Client Error - 4xx
HTTP_400_BAD_REQUEST = 400
HTTP_404_NOT_FOUND = 404
HTTP_405_METHOD_NOT_ALLOWED = 405
HTTP_415_UNSUPPORTED_MEDIA_TYPE = 415

# Server Error - 5xx
HTTP_500_INTERNAL_SERVER_ERROR = 500

# Command line exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
