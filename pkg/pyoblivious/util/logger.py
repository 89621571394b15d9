import sys
import logging

LOG_NAME = "pyoblivious"
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

def getLog(name):
    return logging.getLogger(name)

def createLog(name, level=None):

    root = logging.getLogger(name)
    # None keeps the level already configured
    if level is not None:
        root.setLevel(level)

    # clients and the cli both call this, only attach one handler
    if not any(getattr(h, "_pyoblivious", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stdout)
        handler.setLevel(logging.DEBUG)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._pyoblivious = True
        root.addHandler(handler)

    return root
