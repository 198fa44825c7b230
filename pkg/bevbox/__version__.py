#
#   _|                                _|
#   _|_|_|      _|_|    _|      _|   _|_|_|      _|_|    _|    _|
#   _|    _|  _|_|_|_|  _|      _|   _|    _|  _|    _|    _|_|
#   _|    _|  _|          _|  _|     _|    _|  _|    _|  _|    _|
#   _|_|_|      _|_|_|      _|       _|_|_|      _|_|    _|    _|
#

__title__ = "bevbox"
__description__ = "Oriented bounding boxes from bird's-eye-view point clouds"
__url__ = "https://roniawz.github.io/bevbox"
__version__ = "0.1.0"
__author__ = "Weizhe Yang"
__license__ = "MIT"
__copyright__ = "Copyright 2020, Weizhe Yang"
