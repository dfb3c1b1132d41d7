import zipfile

import numpy as np

from qcost.error import ConfigError


def assign_config(self, kwargs):
    '''
    Apply keyword overrides to an object whose defaults were set in
    `__init__`. Entries of a nested `config` dict are cast to the type of
    the existing default; unknown keys are rejected.
    '''
    for key, value in kwargs.items():
        setattr(self, key, value)
    if hasattr(self, 'config'):
        for key, value in self.config.items():
            if not hasattr(self, key):
                raise ConfigError(f"{type(self).__name__} has no setting '{key}'")
            default = getattr(self, key)
            if default is None or isinstance(default, (np.ndarray, dict)):
                setattr(self, key, value)
            elif isinstance(default, bool):
                setattr(self, key, _to_bool(key, value))
            elif isinstance(default, (list, tuple)):
                setattr(self, key, type(default)(value))
            else:
                try:
                    setattr(self, key, type(default)(value))
                except (TypeError, ValueError):
                    raise ConfigError(
                        f"setting '{key}' expects {type(default).__name__}, "
                        f"got {value!r}")
        del self.config


def _to_bool(key, value):
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ('1', 'true', 'yes', 'on'):
            return True
        if lowered in ('0', 'false', 'no', 'off'):
            return False
        raise ConfigError(f"setting '{key}' expects a boolean, got {value!r}")
    return bool(value)


def np_random(seed=None, *keys):
    '''
    Generator whose stream is a pure function of `seed` and the extra
    integer `keys` (e.g. a replica index). `seed=None` draws fresh entropy.
    '''
    if seed is None:
        return np.random.default_rng()
    entropy = [int(seed)] + [int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def create_measure(config, /, *args, **kwargs):
    '''
    Build a registered measure from an id ("Scope-v0"), a subcommand name
    ("scope") or a dict with a "measure" key plus settings.
    '''
    from qcost.measures import make
    from qcost.measures.measure_list import COMMAND_MEASURES, MEASURE_LIST

    settings = {}
    if type(config) == dict:
        settings = {key: value for key, value in config.items() if key != 'measure'}
        name = config['measure']
    else:
        name = config
    by_lower = {m.lower(): m for m in MEASURE_LIST}
    measure_id = COMMAND_MEASURES.get(name.lower(), by_lower.get(name.lower(), name))
    return make(measure_id, **{**settings, **kwargs})


_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def save_npz(path, **arrays):
    '''
    Compressed .npz archive readable by np.load. Members carry a fixed
    timestamp so equal arrays give equal bytes.
    '''
    with zipfile.ZipFile(path, 'w', compression=zipfile.ZIP_DEFLATED) as archive:
        for name, value in arrays.items():
            info = zipfile.ZipInfo(name + '.npy', date_time=_ZIP_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            with archive.open(info, 'w', force_zip64=True) as handle:
                np.lib.format.write_array(handle, np.asanyarray(value), allow_pickle=False)
