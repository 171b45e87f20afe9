# Set by --debug: errors propagate with their traceback instead of a one-line message.
DEBUG = False
