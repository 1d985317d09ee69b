from dataclasses import asdict, dataclass, field, fields
import json
import os
from typing import List, Optional, Tuple

from .modes import AffinityVariant, Classifier, Correction, Criterion, FlatteningMethod, PlaneMode, TestMethod

THREADS_VARIABLE = 'DSSREP_THREADS'
MAX_GRID = 7

class ConfigError(ValueError):
    """Raised for invalid or unreadable run configurations."""
    pass

def _threads_from_env() -> int:
    value = os.getenv(THREADS_VARIABLE)
    if not value:
        return 1
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f'{THREADS_VARIABLE} must be an integer, got {value!r}')

@dataclass
class RunConfig():
    """Every setting of a run.  A copy is written next to the artifacts it produced."""

    inputs:List[str] = field(default_factory=list)
    """Mesh files, rep files, directories or glob patterns, depending on the command."""

    delta:float = 0.5
    """Penalization of the boundary division affinity."""

    variant:AffinityVariant = AffinityVariant.LITERAL

    grid:int = 4
    """Largest sheet and spine degree tried by score and by fit without fixed degrees."""

    degrees:Optional[Tuple[int, int]] = None
    """Fixed (sheet, spine) degrees.  When None, fit chooses the best pair of the grid."""

    stations:int = 15
    vein_samples:int = 3
    mode:PlaneMode = PlaneMode.RELAXED_SPINE_CHORDAL_PLANES

    pitch:Optional[float] = None
    """Sampling pitch of the CMS grid; None means a 64th of the bounding box diagonal."""

    criterion:Criterion = Criterion.SCORE2
    seed:int = 0
    output:str = 'out'

    resolution:int = 128
    """Voxels along the longest axis for volume coverage."""

    permutations:int = 1000
    alpha:float = 0.05
    fdr:float = 0.1
    correction:Correction = Correction.BH
    test_method:TestMethod = TestMethod.HOTELLING
    classifier:Classifier = Classifier.KNN
    folds:int = 10
    perplexity:float = 30.0
    iterations:int = 1000

    flattening:Optional[FlatteningMethod] = None
    """None picks PCA when the sheet is flatable and t-SNE otherwise."""

    normalize:bool = True
    """Divide reps by their LP-size before testing (shape analysis)."""

    include_size:bool = False
    """Append log LP-size as a feature (size-and-shape analysis)."""

    threads:int = field(default_factory=_threads_from_env)

    def __post_init__(self):
        self._coerce()

    def _coerce(self) -> None:
        try:
            self.variant = AffinityVariant(self.variant)
            self.mode = PlaneMode(self.mode)
            self.criterion = Criterion(self.criterion)
            self.correction = Correction(self.correction)
            self.test_method = TestMethod(self.test_method)
            self.classifier = Classifier(self.classifier)
            if self.flattening is not None:
                self.flattening = FlatteningMethod(self.flattening)
        except ValueError as e:
            raise ConfigError(str(e))
        if self.degrees is not None:
            self.degrees = tuple(int(d) for d in self.degrees)
        if isinstance(self.inputs, str):
            self.inputs = [self.inputs]
        self.inputs = list(self.inputs)

    @classmethod
    def from_file(cls, path:str) -> 'RunConfig':
        """Reads a JSON object whose keys are RunConfig field names."""
        try:
            with open(path, 'r') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f'{path} is not valid JSON: {e}')
        if not isinstance(data, dict):
            raise ConfigError(f'{path} must hold a JSON object')
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f'Unknown setting(s) in {path}: {", ".join(unknown)}')
        return cls(**data)

    def merge(self, args) -> 'RunConfig':
        """Returns a copy where every attribute of args that names a field and is not None wins."""
        data = asdict(self)
        for f in fields(self):
            value = getattr(args, f.name, None)
            if value is not None:
                data[f.name] = value
        return RunConfig(**data)

    def validate(self) -> 'RunConfig':
        checks = [
            (self.delta > 0, f'delta must be positive, got {self.delta}'),
            (1 <= self.grid <= MAX_GRID, f'grid must be in 1..{MAX_GRID}, got {self.grid}'),
            (self.degrees is None or (len(self.degrees) == 2 and all(1 <= d <= MAX_GRID for d in self.degrees)), f'degrees must be two values in 1..{MAX_GRID}, got {self.degrees}'),
            (self.stations >= 3 and self.stations % 2 == 1, f'stations must be odd and at least 3, got {self.stations}'),
            (self.vein_samples >= 1, f'vein_samples must be at least 1, got {self.vein_samples}'),
            (self.pitch is None or self.pitch > 0, f'pitch must be positive, got {self.pitch}'),
            (self.resolution >= 16, f'resolution must be at least 16, got {self.resolution}'),
            (self.permutations >= 1, f'permutations must be at least 1, got {self.permutations}'),
            (0 < self.alpha < 1, f'alpha must be in (0, 1), got {self.alpha}'),
            (0 < self.fdr < 1, f'fdr must be in (0, 1), got {self.fdr}'),
            (self.folds >= 2, f'folds must be at least 2, got {self.folds}'),
            (self.perplexity > 0, f'perplexity must be positive, got {self.perplexity}'),
            (self.iterations >= 1, f'iterations must be at least 1, got {self.iterations}'),
            (self.threads >= 1, f'threads must be at least 1, got {self.threads}'),
        ]
        errors = [message for ok, message in checks if not ok]
        if errors:
            raise ConfigError('; '.join(errors))
        return self

    def to_dict(self) -> dict:
        data = asdict(self)
        for key, value in data.items():
            if hasattr(value, 'value'):
                data[key] = value.value
            elif isinstance(value, tuple):
                data[key] = list(value)
        return data

    def write(self, directory:str) -> str:
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, 'config.json')
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2)
        return path
