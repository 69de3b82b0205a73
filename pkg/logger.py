import sys

from colorama import Fore, Style, init

init()


class Logger:
    verbose = False
    quiet = False

    @staticmethod
    def _emit(color, message, stream=None):
        print(color + str(message) + Style.RESET_ALL, file=stream or sys.stdout)

    @staticmethod
    def log(message):
        if not Logger.quiet:
            Logger._emit(Fore.WHITE, message)

    @staticmethod
    def error(message):
        Logger._emit(Fore.RED, message, sys.stderr)

    @staticmethod
    def warning(message):
        if not Logger.quiet:
            Logger._emit(Fore.YELLOW, message, sys.stderr)

    @staticmethod
    def info(message):
        if not Logger.quiet:
            Logger._emit(Fore.BLUE, message)

    @staticmethod
    def success(message):
        if not Logger.quiet:
            Logger._emit(Fore.GREEN, message)

    @staticmethod
    def debug(message):
        if Logger.verbose and not Logger.quiet:
            Logger._emit(Fore.MAGENTA, message)
