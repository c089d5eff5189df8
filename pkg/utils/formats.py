"""
File formats for datasets, coresets, parameters, reports and run manifests

Every file carries a schema tag "tsc-<kind>/<major>.<minor>"; readers reject
an unknown kind or major version. JSON floats are written with 17 significant
digits so they read back bit-identical.
"""

import hashlib
import math
import struct
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
import simplejson

from model.types import Component, Coreset, EntitySeries, MixtureParams, TimeSeriesDataset
from utils.errors import SchemaError

PathLike = Union[str, Path]

SCHEMA_VERSIONS = {
    'dataset': (1, 0),
    'coreset': (1, 0),
    'params': (1, 0),
    'truth': (1, 0),
    'report': (1, 0),
    'manifest': (1, 0),
}

BINARY_MAGIC = b'TSCB'
BINARY_HEADER = struct.Struct('<4sHHQQ')
BINARY_ENTITY = struct.Struct('<QQ')


def schema_tag(kind: str) -> str:
    major, minor = SCHEMA_VERSIONS[kind]
    return f"tsc-{kind}/{major}.{minor}"


def check_schema(tag: Any, kind: str) -> None:
    """Raise SchemaError unless tag names this kind with a known major version"""
    if not isinstance(tag, str) or not tag.startswith(f"tsc-{kind}/"):
        raise SchemaError(f"Expected a tsc-{kind} file, found schema {tag!r}")
    version = tag.split('/', 1)[1]
    try:
        major = int(version.split('.')[0])
    except ValueError as e:
        raise SchemaError(f"Malformed schema version {version!r}") from e
    if major != SCHEMA_VERSIONS[kind][0]:
        raise SchemaError(f"Unsupported {kind} schema major version {major} (supported: {SCHEMA_VERSIONS[kind][0]})")


def _exact(value: Any) -> Any:
    """Floats to 17-digit Decimals, numpy scalars/arrays to Python, non-finite to None"""
    if isinstance(value, dict):
        return {str(k): _exact(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_exact(v) for v in value]
    if isinstance(value, np.ndarray):
        return _exact(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return Decimal(format(value, '.17g')) if math.isfinite(value) else None
    return value


def dumps_json(obj: Any) -> str:
    return simplejson.dumps(_exact(obj), use_decimal=True, sort_keys=True, indent=2) + '\n'


def write_json(obj: Any, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(dumps_json(obj))
    return path


def read_json(path: PathLike, kind: str) -> Dict[str, Any]:
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            payload = simplejson.load(handle)
    except simplejson.JSONDecodeError as e:
        raise SchemaError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(payload, dict):
        raise SchemaError(f"{path} does not hold a JSON object")
    check_schema(payload.get('schema'), kind)
    return payload


def file_sha256(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


# Datasets

def write_dataset(data: TimeSeriesDataset, path: PathLike, fmt: str = 'csv') -> Path:
    """Write as CSV (entity_id,t,f0..f{d-1}; t is 1-based) or as the binary layout"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == 'bin':
        major, minor = SCHEMA_VERSIONS['dataset']
        with open(path, 'wb') as handle:
            handle.write(BINARY_HEADER.pack(BINARY_MAGIC, major, minor, data.N, data.d))
            for entity in data.entities:
                handle.write(BINARY_ENTITY.pack(entity.id, entity.T))
                handle.write(np.ascontiguousarray(entity.observations, dtype='<f8').tobytes())
        return path
    if fmt != 'csv':
        raise ValueError(f"Unknown dataset format '{fmt}' (expected csv or bin)")

    frame = pd.DataFrame(
        np.vstack([e.observations for e in data.entities]),
        columns=[f"f{j}" for j in range(data.d)],
    )
    frame.insert(0, 't', np.concatenate([np.arange(1, e.T + 1) for e in data.entities]))
    frame.insert(0, 'entity_id', np.repeat([e.id for e in data.entities], [e.T for e in data.entities]))
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write(f"# {schema_tag('dataset')}\n")
        frame.to_csv(handle, index=False, float_format='%.17g', lineterminator='\n')
    return path


def _read_binary(path: Path) -> TimeSeriesDataset:
    raw = path.read_bytes()
    if len(raw) < BINARY_HEADER.size:
        raise SchemaError(f"{path} is too short for a binary dataset")
    magic, major, minor, n, d = BINARY_HEADER.unpack_from(raw, 0)
    check_schema(f"tsc-dataset/{major}.{minor}", 'dataset')
    offset = BINARY_HEADER.size
    entities = []
    for _ in range(n):
        try:
            entity_id, length = BINARY_ENTITY.unpack_from(raw, offset)
        except struct.error as e:
            raise SchemaError(f"{path} is truncated in an entity header: {e}") from e
        offset += BINARY_ENTITY.size
        count = length * d
        if offset + 8 * count > len(raw):
            raise SchemaError(f"{path} is truncated at entity {entity_id}")
        values = np.frombuffer(raw, dtype='<f8', count=count, offset=offset).reshape(length, d)
        offset += 8 * count
        entities.append(EntitySeries(entity_id, values.astype(np.float64)))
    return TimeSeriesDataset(tuple(entities), d)


def read_dataset(path: PathLike) -> TimeSeriesDataset:
    """Read either format; the binary one is recognised by its magic bytes"""
    path = Path(path)
    with open(path, 'rb') as handle:
        head = handle.read(4)
    if head == BINARY_MAGIC:
        return _read_binary(path)

    with open(path, 'r', encoding='utf-8') as handle:
        first = handle.readline().strip()
    if not first.startswith('#'):
        raise SchemaError(f"{path} has no schema line")
    check_schema(first.lstrip('#').strip(), 'dataset')

    frame = pd.read_csv(path, comment='#')
    features = [c for c in frame.columns if c not in ('entity_id', 't')]
    if list(frame.columns[:2]) != ['entity_id', 't'] or features != [f"f{j}" for j in range(len(features))] \
            or not features:
        raise SchemaError(f"{path} header must be entity_id,t,f0,...,f{{d-1}}")
    frame = frame.sort_values(['entity_id', 't'], kind='mergesort')
    entities = []
    for entity_id, group in frame.groupby('entity_id', sort=True):
        times = group['t'].to_numpy()
        if not np.array_equal(times, np.arange(1, len(times) + 1)):
            raise SchemaError(f"{path}: entity {entity_id} time indices are not 1..T")
        entities.append(EntitySeries(int(entity_id), group[features].to_numpy(dtype=np.float64)))
    return TimeSeriesDataset(tuple(entities), len(features))


# Parameters

def params_to_dict(params: MixtureParams) -> Dict[str, Any]:
    return {
        'schema': schema_tag('params'),
        'alpha': params.alpha,
        'components': [
            {'mu': c.mu, 'sigma': c.sigma.ravel(), 'ar': c.ar}
            for c in params.components
        ],
    }


def params_from_dict(payload: Dict[str, Any]) -> MixtureParams:
    check_schema(payload.get('schema'), 'params')
    try:
        components = []
        for entry in payload['components']:
            mu = np.asarray(entry['mu'], dtype=np.float64)
            d = mu.shape[0]
            sigma = np.asarray(entry['sigma'], dtype=np.float64).reshape(d, d)
            components.append(Component(mu=mu, sigma=sigma, ar=np.asarray(entry['ar'], dtype=np.float64)))
        return MixtureParams(alpha=np.asarray(payload['alpha'], dtype=np.float64), components=tuple(components))
    except (KeyError, TypeError) as e:
        raise SchemaError(f"Malformed params payload: {e}") from e


def write_params(params: MixtureParams, path: PathLike) -> Path:
    return write_json(params_to_dict(params), path)


def read_params(path: PathLike) -> MixtureParams:
    return params_from_dict(read_json(path, 'params'))


def write_truth(params: MixtureParams, labels: np.ndarray, path: PathLike) -> Path:
    payload = params_to_dict(params)
    payload['schema'] = schema_tag('truth')
    payload['labels'] = np.asarray(labels)
    return write_json(payload, path)


def read_truth(path: PathLike) -> Tuple[MixtureParams, np.ndarray]:
    payload = read_json(path, 'truth')
    payload['schema'] = schema_tag('params')
    return params_from_dict(payload), np.asarray(payload['labels'], dtype=np.int64)


# Coresets

def coreset_to_dict(coreset: Coreset) -> Dict[str, Any]:
    ids = coreset.entity_ids
    return {
        'schema': schema_tag('coreset'),
        'method': coreset.method,
        'seed': coreset.seed,
        'M': coreset.m_entities,
        'L': coreset.l_times,
        'entity_ids': list(ids),
        'entity_weights': [coreset.entity_weights[i] for i in ids],
        'time_indices': {str(i): list(coreset.time_indices[i]) for i in ids},
        'time_weights': {str(i): coreset.weights_array(i) for i in ids},
    }


def coreset_from_dict(payload: Dict[str, Any]) -> Coreset:
    check_schema(payload.get('schema'), 'coreset')
    try:
        ids = [int(i) for i in payload['entity_ids']]
        if len(ids) != len(payload['entity_weights']):
            raise SchemaError("entity_ids and entity_weights differ in length")
        time_indices, time_weights = {}, {}
        for i in ids:
            times = [int(t) for t in payload['time_indices'][str(i)]]
            weights = [float(w) for w in payload['time_weights'][str(i)]]
            if len(times) != len(weights):
                raise SchemaError(f"Entity {i}: time indices and weights differ in length")
            time_indices[i] = tuple(times)
            time_weights[i] = dict(zip(times, weights))
        return Coreset(
            entity_ids=tuple(ids),
            entity_weights={i: float(w) for i, w in zip(ids, payload['entity_weights'])},
            time_indices=time_indices,
            time_weights=time_weights,
            method=payload.get('method', 'crgmm'),
            seed=payload.get('seed'),
            m_entities=payload.get('M'),
            l_times=payload.get('L'),
        )
    except (KeyError, TypeError) as e:
        raise SchemaError(f"Malformed coreset payload: missing or invalid {e}") from e


def write_coreset(coreset: Coreset, path: PathLike) -> Path:
    return write_json(coreset_to_dict(coreset), path)


def read_coreset(path: PathLike) -> Coreset:
    return coreset_from_dict(read_json(path, 'coreset'))


# Run manifests

@dataclass
class RunManifest:
    """What was run, with which settings and seed, and what it produced"""
    command: str
    config: Dict[str, Any]
    seed: int
    artifacts: Dict[str, str] = field(default_factory=dict)
    version: str = ''
    rng: str = ''

    def to_dict(self) -> Dict[str, Any]:
        return {
            'schema': schema_tag('manifest'),
            'command': self.command,
            'config': self.config,
            'seed': self.seed,
            'artifacts': dict(sorted(self.artifacts.items())),
            'version': self.version,
            'rng': self.rng,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> 'RunManifest':
        check_schema(payload.get('schema'), 'manifest')
        return cls(command=payload['command'], config=payload['config'], seed=int(payload['seed']),
                   artifacts=dict(payload['artifacts']), version=payload.get('version', ''),
                   rng=payload.get('rng', ''))

    def add_artifact(self, path: PathLike) -> None:
        self.artifacts[Path(path).name] = file_sha256(path)

    def write(self, path: PathLike) -> Path:
        return write_json(self.to_dict(), path)

    @classmethod
    def read(cls, path: PathLike) -> 'RunManifest':
        return cls.from_dict(read_json(path, 'manifest'))


def write_report(payload: Dict[str, Any], path: PathLike) -> Path:
    return write_json({'schema': schema_tag('report'), **payload}, path)


def write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        frame.to_csv(handle, index=False, float_format='%.17g', lineterminator='\n')
    return path
