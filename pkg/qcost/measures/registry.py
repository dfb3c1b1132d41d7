import importlib
from collections import namedtuple

from qcost.error import Error, UnregisteredMeasure

MeasureSpec = namedtuple('MeasureSpec', ['id', 'entry_point', 'kwargs'])


class MeasureRegistry:
    '''Maps measure ids such as "Scope-v0" to `module:Class` entry points.'''

    def __init__(self):
        self.specs = {}

    def register(self, id, entry_point, **kwargs):
        if id in self.specs:
            raise Error('measure {} registered twice'.format(id))
        self.specs[id] = MeasureSpec(id=id, entry_point=entry_point, kwargs=kwargs)

    def spec(self, id):
        try:
            return self.specs[id]
        except KeyError:
            raise UnregisteredMeasure('no registered measure with id: {}'.format(id))

    def load(self, id):
        module_name, class_name = self.spec(id).entry_point.split(':')
        return getattr(importlib.import_module(module_name), class_name)

    def make(self, id, **kwargs):
        spec = self.spec(id)
        return self.load(id)(**{**spec.kwargs, **kwargs})


registry = MeasureRegistry()


def register(id, **kwargs):
    return registry.register(id, **kwargs)


def make(id, **kwargs):
    return registry.make(id, **kwargs)


def spec(id):
    return registry.spec(id)
