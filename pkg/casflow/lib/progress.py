'''
Logging/error handling infrastructure.
'''

from __future__ import annotations

from dataclasses import dataclass
import shutil
import threading
import traceback


RESET = '\033[0m'


def wrap(text: str, width: int):
    if text == '':
        yield ''
    while text:
        newline_index = text.find('\n')
        if newline_index != -1 and newline_index <= width:
            yield text[:newline_index]
            text = text[newline_index + 1:]
        else:
            yield text[:width]
            text = text[width:]


@dataclass
class Details:
    title: str
    content: str


class Message:
    LOCATION_COLOUR: str
    MSG_COLOUR: str
    TAG: str

    def __init__(self, location: str, msg: str, details_list: list[Details] | None = None):
        self._location = location
        self._msg = msg
        self._details_list = details_list or []

    @property
    def location(self) -> str:
        return self._location

    @property
    def msg(self) -> str:
        return self._msg

    def print(self):
        print(f'{self.LOCATION_COLOUR}{self.TAG}{self._location}:{RESET} '
              f'{self.MSG_COLOUR}{self._msg}{RESET}')

        terminal_width = shutil.get_terminal_size(fallback = (80, 40)).columns
        inner_width = terminal_width - 6

        first = True
        for details in self._details_list:
            if first:
                print(f'  ┌─{"─" * inner_width}─┐')
                first = False
            else:
                print(f'  ├─{"─" * inner_width}─┤')

            print(f'  │ {details.title}{" " * (inner_width - len(details.title))} │')
            for line in wrap(details.content.rstrip(), inner_width):
                print(f'  │ {line}{" " * (inner_width - len(line))} │')

        if not first:
            print(f'  └─{"─" * inner_width}─┘')

    def __str__(self):
        return f'{self.TAG}{self._location}: {self._msg}'


class ProgressMsg(Message):
    LOCATION_COLOUR = '\033[32m'
    MSG_COLOUR = ''
    TAG = ''


class WarningMsg(Message):
    LOCATION_COLOUR = '\033[33;1m'
    MSG_COLOUR = '\033[37;1m'
    TAG = '[!] '


class ErrorMsg(Message):
    LOCATION_COLOUR = '\033[31;1m'
    MSG_COLOUR = '\033[37;1m'
    TAG = '[!!] '


class Progress:
    def __init__(self):
        self._errors: list[ErrorMsg] = []
        self._warnings: list[WarningMsg] = []

        # Worker threads may report concurrently; whole messages must not interleave.
        self._lock = threading.Lock()


    def show(self, msg: Message):
        with self._lock:
            msg.print()
            if isinstance(msg, ErrorMsg):
                self._errors.append(msg)
            elif isinstance(msg, WarningMsg):
                self._warnings.append(msg)
        return msg


    def progress(self, location: str, *, msg: str):
        return self.show(ProgressMsg(location, msg))


    def cache_hit(self, location: str, *, resource: str | None = None):
        return self.show(ProgressMsg(
            location, 'Using cached result' + (f' for {resource}' if resource else '')))


    def warning(self, location: str, *, msg: str):
        return self.show(WarningMsg(location, msg = msg))


    def error(self, location: str, *, msg: str | None = None, exception: Exception | None = None,
              show_traceback: bool = True):
        details_list = []
        if exception:
            msg = (
                f'{msg}: {str(exception)} ({exception.__class__.__name__})'
                if msg else str(exception))
            if show_traceback:
                details_list.append(Details('Traceback', ''.join(traceback.format_exc())))

        elif not msg:
            msg = 'error'

        return self.show(ErrorMsg(location, msg, details_list))


    def get_errors(self):
        return list(self._errors)


    def get_warnings(self):
        return list(self._warnings)
