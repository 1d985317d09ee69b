from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import json
import logging
import os
from typing import Dict, Generator, List, Optional, Tuple

import numpy as np

from .boundary_division import BoundaryDivision, divide_boundary, write_crest_json, write_labels_csv
from .cms import CmsPointSet, extract_cms
from .config import RunConfig
from .exporters.figures import write_straightened_svg, write_svg
from .exporters.ply import PLYExporter
from .exporters.report import ReportExporter
from .flatten import FlatteningMap, flatten_sheet
from .gc2d import Gc2dModel, fit_gc2d, model_to_dict, straighten_2d
from .gof import FitResult, GofReport, fit_grid, fit_model, format_table, select_best_fit, write_table_csv
from .loaders import Loader, read_polygon_csv
from .lp_dssrep import LpDssRep, write_rep
from .mesh_core import TriangleMesh, load_mesh
from .modes import Criterion
from .stats import ClassificationReport, TestReport, classify_cv, feature_vectors, run_tests, write_features_csv, write_partial_csv
from .sweep_fit import up_vector
from .synth import SynthSpec, make_object, simulate_groups, write_cohort

logger = logging.getLogger(__name__)

@dataclass(eq=False)
class FitOutcome():
    name:str
    fit:FitResult
    reports:List[GofReport]
    directory:str
    written:Dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """True when the fit's cross-sections stay disjoint inside the object."""
        return self.fit.rcc.passed

def _stem(path:str) -> str:
    name = os.path.basename(os.path.normpath(path))
    return name.split('.')[0] or 'object'

def _fit_mesh(args) -> Tuple[str, LpDssRep]:
    path, config = args
    mesh = load_mesh(path)
    commands = Commands(replace(config, threads=1))
    division = divide_boundary(mesh, config.delta, config.variant)
    return path, commands.fit_object(mesh, division).fit.rep

class Commands():
    """Commands that run the fitting, scoring and testing pipelines and write their artifacts."""

    def __init__(self, config:RunConfig, loader:Optional[Loader]=None):
        self.config = config.validate()
        """The settings of the run."""

        self.loader = loader if loader is not None else Loader()

    def _directory(self, *parts:str) -> str:
        path = os.path.join(self.config.output, *parts)
        os.makedirs(path, exist_ok=True)
        return path

    def _fit_options(self) -> dict:
        c = self.config
        return {'stations': c.stations, 'vein_samples': c.vein_samples, 'mode': c.mode, 'resolution': c.resolution,
                'flattening': c.flattening, 'perplexity': c.perplexity, 'iterations': c.iterations, 'seed': c.seed}

    def fit_object(self, mesh:TriangleMesh, division:BoundaryDivision, cms:Optional[CmsPointSet]=None) -> FitOutcome:
        """
        Fits the configured degrees, or picks the best pair of the degree grid by the configured criterion
        when no degrees are fixed.  The outcome carries the reports of every pair tried.
        """
        c = self.config
        if cms is None:
            cms = extract_cms(mesh, division, c.pitch)
        if c.degrees is not None:
            fit = fit_model(mesh, division, cms, c.degrees, **self._fit_options())
            return FitOutcome('', fit, [fit.report], '')
        fit, reports = select_best_fit(mesh, c.grid, c.criterion, division=division, cms=cms, pitch=c.pitch, threads=c.threads, **self._fit_options())
        return FitOutcome('', fit, reports, '')

    def fit(self, path:str) -> FitOutcome:
        """
        Fits the mesh at path and writes rep.json, gof.json, config.json, labels.csv, crest.json, the PLY
        dumps and report.pdf into <output>/<mesh name>.
        """
        c = self.config
        name = _stem(path)
        mesh = load_mesh(path)
        division = divide_boundary(mesh, c.delta, c.variant)
        cms = extract_cms(mesh, division, c.pitch)
        outcome = self.fit_object(mesh, division, cms)
        outcome.name = name
        outcome.directory = self._directory(name)
        fit = outcome.fit

        directory = outcome.directory
        written = outcome.written
        written['rep'] = os.path.join(directory, 'rep.json')
        write_rep(fit.rep, written['rep'])
        written['gof'] = os.path.join(directory, 'gof.json')
        with open(written['gof'], 'w') as f:
            json.dump({'best': fit.report.to_dict(), 'criterion': Criterion(c.criterion).value, 'rcc': fit.rcc.to_dict(),
                       'grid': [r.to_dict() for r in outcome.reports]}, f, indent=2)
        written['labels'] = os.path.join(directory, 'labels.csv')
        write_labels_csv(division, written['labels'])
        written['crest'] = os.path.join(directory, 'crest.json')
        write_crest_json(division, written['crest'])
        written.update(PLYExporter(directory).export_fit(fit.sheet, fit.spokes, cms))
        written['report'] = os.path.join(directory, 'report.pdf')
        ReportExporter().export(name, fit, mesh, outcome.reports, c.to_dict(), written['report'])
        written['config'] = c.write(directory)
        logger.info('Wrote %d artifacts to %s', len(written), directory)
        return outcome

    def score(self, path:str) -> Generator[str, None, None]:
        """
        Fits every degree pair of the grid to the mesh at path, writes <output>/<mesh name>/scores.csv and
        yields the table as text lines.
        """
        c = self.config
        mesh = load_mesh(path)
        division = divide_boundary(mesh, c.delta, c.variant)
        fits, failures = fit_grid(mesh, c.grid, division=division, pitch=c.pitch, threads=c.threads, **self._fit_options())
        reports = [fit.report for fit in fits]
        directory = self._directory(_stem(path))
        write_table_csv(reports, os.path.join(directory, 'scores.csv'))
        c.write(directory)
        for failure in failures:
            logger.warning('Degrees %s', failure)
        yield from format_table(reports)

    def cohort(self, path:str, group:str) -> List[LpDssRep]:
        """
        Returns the reps of a cohort: read from rep files when path holds them, otherwise fitted to its
        meshes (with threads worker processes) and saved under <output>/<group>.
        """
        if self.loader.is_rep_directory(path):
            return self.loader.reps(path)
        paths = list(self.loader.list_path(path))
        jobs = [(p, self.config) for p in paths]
        if self.config.threads > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=self.config.threads) as pool:
                fitted = list(pool.map(_fit_mesh, jobs))
        else:
            fitted = [_fit_mesh(job) for job in jobs]
        directory = self._directory(group)
        for mesh_path, rep in fitted:
            write_rep(rep, os.path.join(directory, f'{_stem(mesh_path)}.rep.json'))
        logger.info('Fitted %d objects of %s', len(fitted), path)
        return [rep for _, rep in fitted]

    def test(self, path_a:str, path_b:str) -> TestReport:
        """Runs the global and partial tests and writes test.json, partial.csv and config.json."""
        c = self.config
        a = self.cohort(path_a, 'a')
        b = self.cohort(path_b, 'b')
        report = run_tests(a, b, c.test_method, c.permutations, c.seed, c.alpha, c.fdr, c.correction, c.normalize, c.include_size)
        directory = self._directory()
        with open(os.path.join(directory, 'test.json'), 'w') as f:
            json.dump(report.to_dict(), f, indent=2)
        write_partial_csv(report, os.path.join(directory, 'partial.csv'))
        c.write(directory)
        return report

    def classify(self, path_a:str, path_b:str) -> ClassificationReport:
        """Cross-validates the configured classifier and writes classify.json, features.csv and config.json."""
        c = self.config
        a = feature_vectors(self.cohort(path_a, 'a'), c.normalize, c.include_size)
        b = feature_vectors(self.cohort(path_b, 'b'), c.normalize, c.include_size)
        report = classify_cv(a, b, c.classifier, c.folds, c.seed)
        directory = self._directory()
        with open(os.path.join(directory, 'classify.json'), 'w') as f:
            json.dump(report.to_dict(), f, indent=2)
        write_features_csv(np.hstack([np.vstack([a, b]), np.r_[np.zeros(len(a)), np.ones(len(b))][:, None]]),
                           os.path.join(directory, 'features.csv'), [f'f{i}' for i in range(a.shape[1])] + ['group'])
        c.write(directory)
        return report

    def synth(self, path:str) -> List[str]:
        """
        Reads a JSON file and writes synthetic objects.  A file with n_per_group simulates two cohorts into
        <output>/a and <output>/b; any other file is a single object spec written to <output>/object.
        """
        c = self.config
        with open(path, 'r') as f:
            data = json.load(f)
        if 'n_per_group' in data:
            cohorts = simulate_groups(int(data['n_per_group']), data.get('effect', 'protrusion'), int(data.get('seed', c.seed)), int(data.get('resolution', 4)))
            written = write_cohort(cohorts.a, cohorts.specs_a, self._directory('a'), seed=cohorts.seed)
            written += write_cohort(cohorts.b, cohorts.specs_b, self._directory('b'), seed=cohorts.seed)
        else:
            spec = SynthSpec.from_dict(data)
            written = write_cohort([make_object(spec)], [spec], self._directory('object'), seed=spec.seed)
        c.write(self._directory())
        return written

    def flatten(self, path:str) -> FlatteningMap:
        """Flattens the CMS of the mesh at path and writes embedding.csv (x, y, z, u, v)."""
        c = self.config
        mesh = load_mesh(path)
        division = divide_boundary(mesh, c.delta, c.variant)
        cms = extract_cms(mesh, division, c.pitch)
        flat = flatten_sheet(cms.points, up_vector(mesh, division), c.flattening, c.perplexity, c.iterations, c.seed)
        directory = self._directory(_stem(path))
        write_features_csv(np.hstack([flat.samples, flat.coords]), os.path.join(directory, 'embedding.csv'), ['x', 'y', 'z', 'u', 'v'])
        c.write(directory)
        return flat

    def straighten2d(self, path:str, count:int=25, degree:int=2) -> Gc2dModel:
        """Fits a 2D generalized cylinder to the polygon CSV at path and writes gc2d.json, gc2d.svg and straightened.svg."""
        c = self.config
        polygon = read_polygon_csv(path)
        model = fit_gc2d(polygon, degree, count, c.pitch, c.delta, c.variant)
        directory = self._directory(_stem(path))
        data = model_to_dict(model)
        flat = straighten_2d(model)
        data['straightened'] = {'spine': flat.spine.tolist(), 'up_tips': flat.up_tips.tolist(), 'down_tips': flat.down_tips.tolist()}
        with open(os.path.join(directory, 'gc2d.json'), 'w') as f:
            json.dump(data, f, indent=1)
        write_svg(model, os.path.join(directory, 'gc2d.svg'))
        write_straightened_svg(model, os.path.join(directory, 'straightened.svg'))
        c.write(directory)
        return model

