"""
Plain ``key = value`` run configuration.

Keys are long option names with ``-`` or ``_`` (``theta-sigma`` and
``theta_sigma`` are the same key); ``#`` starts a comment. Values are the
text that would follow the flag on the command line; lists are
whitespace-separated and switches take true/false.
"""
import argparse
import logging
from .errors import UsageError

__all__ = [
    'load_config',
    'parse_config',
    'apply_config',
]

logger = logging.getLogger(__name__)

_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')


def parse_config(text, source='<config>'):
    ret = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise UsageError('%s:%d: expected key = value' % (source, lineno))
        key, value = (s.strip() for s in line.split('=', 1))
        if not key:
            raise UsageError('%s:%d: empty key' % (source, lineno))
        ret[key.lstrip('-').replace('-', '_')] = value
    return ret


def load_config(path):
    with open(path) as f:
        return parse_config(f.read(), path)


def _switch(key, value):
    v = value.lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise UsageError('%s expects true or false, got %r' % (key, value))


def _convert(action, key, text):
    try:
        ret = (action.type or str)(text)
    except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
        raise UsageError('bad value for %s: %s' % (key, exc))
    if action.choices is not None and ret not in action.choices:
        raise UsageError('bad value for %s: %r is not one of %s'
                         % (key, text, ', '.join(map(str, action.choices))))
    return ret


def apply_config(parser, values):
    """
    Install **values** as defaults of **parser**, so explicit flags still win.
    String values go through each option's ``type`` and ``choices`` like
    command-line text.
    """
    actions = {a.dest: a for a in parser._actions}
    defaults = {}
    for key, value in values.items():
        action = actions.get(key)
        if action is None or key in ('help', 'config'):
            raise UsageError('unknown configuration key %r' % (key,))
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            defaults[key] = _switch(key, value)
        elif isinstance(action, argparse._CountAction):
            defaults[key] = int(value)
        elif action.nargs in ('+', '*') or isinstance(action.nargs, int) or \
                isinstance(action, argparse._AppendAction):
            defaults[key] = [_convert(action, key, v) for v in value.split()]
        else:
            _convert(action, key, value)
            defaults[key] = value
    parser.set_defaults(**defaults)
    logger.debug('configuration defaults: %s', sorted(defaults))
    return defaults
