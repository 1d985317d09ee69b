import argparse
import logging
import os
import sys

from colorama import init, Fore, Style

from .commands import Commands
from .config import RunConfig
from .modes import AffinityVariant, Classifier, Correction, Criterion, FlatteningMethod, PlaneMode, TestMethod
from .version import VERSION

def values(enum) -> list:
    return [member.value for member in enum]

class CLI():
    def __init__(self):
        self.name_width = 24
        self.number_width = 9

        init() # init colorama

    def create_argparser(self) -> argparse.ArgumentParser:
        argparser = argparse.ArgumentParser(prog='dssrep')
        argparser.description = 'Fit, score and compare swept skeletal representations of slab-like objects.'
        argparser.epilog = "Run 'dssrep COMMAND --help' for more information on a command.  Flags override values of the --config file."

        argparser.add_argument('-c', '--config', type=str, default=None, help='JSON file with run settings named like the flags')
        argparser.add_argument('-o', '--output', type=str, default=None, help='Output directory (default: out)')
        argparser.add_argument('--seed', type=int, default=None, help='Root seed of every random choice (default: 0)')
        argparser.add_argument('--threads', type=int, default=None, help='Worker processes (default: $DSSREP_THREADS or 1)')
        argparser.add_argument('-v', '--verbose', action='count', default=0, help='Log progress (-v) or details (-vv)')

        subparsers = argparser.add_subparsers(title='commands')

        about = subparsers.add_parser('about', help='Show information about this program')
        about.set_defaults(func=self.about)

        fit = subparsers.add_parser('fit', help='Fit skeletal representations to meshes and write them with their scores')
        fit.add_argument('inputs', type=str, nargs='*', help='Mesh files (OBJ or PLY), directories or glob patterns')
        self.add_fit_arguments(fit)
        fit.add_argument('--degrees', type=int, nargs=2, metavar=('SHEET', 'SPINE'), default=None, help='Fixed degrees; without them the best pair of the grid is chosen')
        fit.set_defaults(func=self.fit)

        score = subparsers.add_parser('score', help='Score every degree pair of the grid for a mesh')
        score.add_argument('inputs', type=str, nargs='*', help='Mesh file')
        self.add_fit_arguments(score)
        score.set_defaults(func=self.score)

        test = subparsers.add_parser('test', help='Test two cohorts for a difference, globally and per GOP')
        test.add_argument('inputs', type=str, nargs='*', metavar='cohort', help='Two directories of meshes or of rep.json files')
        self.add_fit_arguments(test)
        self.add_cohort_arguments(test)
        test.add_argument('--permutations', type=int, default=None, help='Permutations of the global test (default: 1000)')
        test.add_argument('--alpha', type=float, default=None, help='Significance level of the global test (default: 0.05)')
        test.add_argument('--fdr', type=float, default=None, help='Level of the multiple-testing correction (default: 0.1)')
        test.add_argument('--correction', type=str, choices=values(Correction), default=None, help='Multiple-testing correction (default: bh)')
        test.add_argument('--test-method', dest='test_method', type=str, choices=values(TestMethod), default=None, help='Partial test per GOP (default: hotelling)')
        test.set_defaults(func=self.test)

        classify = subparsers.add_parser('classify', help='Cross-validate a classifier separating two cohorts')
        classify.add_argument('inputs', type=str, nargs='*', metavar='cohort', help='Two directories of meshes or of rep.json files')
        self.add_fit_arguments(classify)
        self.add_cohort_arguments(classify)
        classify.add_argument('--classifier', type=str, choices=values(Classifier), default=None, help='Classifier (default: knn)')
        classify.add_argument('--folds', type=int, default=None, help='Cross-validation folds (default: 10)')
        classify.set_defaults(func=self.classify)

        synth = subparsers.add_parser('synth', help='Generate synthetic ellipsoids or two simulated cohorts')
        synth.add_argument('inputs', type=str, nargs='*', metavar='spec', help='JSON object spec, or a cohort spec with n_per_group')
        synth.set_defaults(func=self.synth)

        flatten = subparsers.add_parser('flatten', help='Flatten the central skeleton of a mesh and write the embedding')
        flatten.add_argument('inputs', type=str, nargs='*', help='Mesh file')
        flatten.add_argument('--delta', type=float, default=None, help='Boundary division penalization (default: 0.5)')
        flatten.add_argument('--pitch', type=float, default=None, help='Skeleton sampling pitch')
        self.add_flattening_arguments(flatten)
        flatten.set_defaults(func=self.flatten)

        straighten2d = subparsers.add_parser('straighten2d', help='Fit a 2D generalized cylinder to a polygon and draw it straightened')
        straighten2d.add_argument('inputs', type=str, nargs='*', metavar='polygon', help='CSV of x,y or x,y,label rows')
        straighten2d.add_argument('--count', type=int, default=25, help='Number of chords (default: 25)')
        straighten2d.add_argument('--degree', type=int, default=2, help='Center curve degree, 1 to 7 (default: 2)')
        straighten2d.add_argument('--delta', type=float, default=None, help='Boundary division penalization (default: 0.5)')
        straighten2d.set_defaults(func=self.straighten2d)

        version = subparsers.add_parser('version', help='Shows the program version')
        version.set_defaults(func=self.version)

        return argparser

    def add_fit_arguments(self, parser:argparse.ArgumentParser) -> None:
        parser.add_argument('--delta', type=float, default=None, help='Boundary division penalization (default: 0.5)')
        parser.add_argument('--variant', type=str, choices=values(AffinityVariant), default=None, help='Boundary division affinity (default: literal)')
        parser.add_argument('--grid', type=int, default=None, help='Largest sheet and spine degree tried, at most 7 (default: 4)')
        parser.add_argument('--stations', type=int, default=None, help='Odd number of spine stations (default: 15)')
        parser.add_argument('--vein-samples', dest='vein_samples', type=int, default=None, help='Spoke sites per vein (default: 3)')
        parser.add_argument('--mode', type=str, choices=values(PlaneMode), default=None, help='Spine and slicing plane construction')
        parser.add_argument('--pitch', type=float, default=None, help='Skeleton sampling pitch (default: bounding box diagonal / 64)')
        parser.add_argument('--criterion', type=str, choices=values(Criterion), default=None, help='Score used to pick the best fit (default: score2)')
        parser.add_argument('--resolution', type=int, default=None, help='Voxels along the longest axis for volume coverage (default: 128)')
        self.add_flattening_arguments(parser)

    def add_flattening_arguments(self, parser:argparse.ArgumentParser) -> None:
        parser.add_argument('--flattening', type=str, choices=values(FlatteningMethod), default=None, help='Force a flattening method')
        parser.add_argument('--perplexity', type=float, default=None, help='t-SNE perplexity (default: 30)')
        parser.add_argument('--iterations', type=int, default=None, help='t-SNE iterations (default: 1000)')

    def add_cohort_arguments(self, parser:argparse.ArgumentParser) -> None:
        parser.add_argument('--degrees', type=int, nargs=2, metavar=('SHEET', 'SPINE'), default=None, help='Fixed degrees for fitting cohort meshes')
        parser.add_argument('--no-normalize', dest='normalize', action='store_const', const=False, default=None, help='Keep absolute lengths (size-and-shape analysis)')
        parser.add_argument('--include-size', dest='include_size', action='store_const', const=True, default=None, help='Add log LP-size as a feature')

    def main(self) -> int:
        return self.parse_args()

    def parse_args(self, input=None) -> int:
        argparser = self.create_argparser()

        if input == None:
            args = argparser.parse_args()
        else:
            args = argparser.parse_args(input)

        try:
            temp = args.func
        except AttributeError:
            argparser.print_help()
            return 0

        levels = [logging.WARNING, logging.INFO, logging.DEBUG]
        logging.basicConfig(level=levels[min(args.verbose, 2)], format='%(levelname)s %(name)s: %(message)s')
        logging.captureWarnings(True)

        if getattr(args, 'inputs', None) == []:
            args.inputs = None

        try:
            return args.func(args) or 0
        except (ValueError, FileNotFoundError) as err:
            module = type(err).__module__
            prefix = module.rsplit('.', 1)[-1] + ': ' if module.startswith('dssrep') else ''
            print(f'{Fore.RED}{prefix}{err}')
            print(Style.RESET_ALL, end='')
            return 1

    def load_config(self, args, count:int=None) -> Commands:
        config = RunConfig.from_file(args.config) if args.config else RunConfig()
        config = config.merge(args)
        if count is not None and len(config.inputs) != count:
            raise ValueError(f'Expected {count} input(s), got {len(config.inputs)}')
        if not config.inputs:
            raise ValueError('No inputs given')
        return Commands(config)

    def row(self, *args):
        print(' '.join(args))

    def cell(self, text, width, align='left', color=None):
        text = str(text)
        if width != None:
            if len(text) > width:
                text = text[0:width-3] + '...'
            text = text.ljust(width) if align == 'left' else text.rjust(width)
        if color == None:
            return text
        else:
            return color + text + Style.RESET_ALL

    def number(self, value, color=None):
        return self.cell(f'{value:.3f}', self.number_width, align='right', color=color)

    def passed_color(self, passed:bool):
        return Fore.GREEN if passed else Fore.RED

    def about(self, args):
        print(Fore.GREEN + f'dssrep v{VERSION}' + Style.RESET_ALL)
        print(f'{Fore.CYAN}Fits:{Style.RESET_ALL} locally parameterized discrete swept skeletal representations of slab-like meshes')
        print(f'{Fore.CYAN}Scores:{Style.RESET_ALL} volume coverage, skeletal symmetry and tidiness')
        print(f'{Fore.CYAN}Compares:{Style.RESET_ALL} cohorts by global and per-GOP hypothesis tests and classifiers')

    def fit(self, args):
        commands = self.load_config(args)
        self.row(
            self.cell('', self.name_width),
            self.cell('degrees', 8, align='right'),
            *[self.cell(title, self.number_width, align='right') for title in ('coverage', 'symmetry', 'avg tidy', 'strict', 'score1', 'score2')],
            self.cell('rcc', 5, align='right'),
        )

        status = 0
        for path in commands.loader.list_paths(commands.config.inputs):
            outcome = commands.fit(path)
            report = outcome.fit.report
            color = self.passed_color(outcome.passed)
            self.row(
                self.cell(outcome.name, self.name_width),
                self.cell(f'{report.degrees[0]}, {report.degrees[1]}', 8, align='right'),
                self.number(report.volume_coverage),
                self.number(report.skeletal_symmetry),
                self.number(report.avg_tidiness),
                self.number(report.strict_tidiness),
                self.number(report.score1, color=Fore.CYAN),
                self.number(report.score2, color=Fore.CYAN),
                self.cell('pass' if outcome.passed else 'fail', 5, align='right', color=color),
            )
            if not outcome.passed:
                status = 1
        print(f'{Style.DIM}Results written to {os.path.abspath(commands.config.output)}{Style.RESET_ALL}')
        return status

    def score(self, args):
        commands = self.load_config(args, 1)
        for line in commands.score(commands.config.inputs[0]):
            print(line)

    def test(self, args):
        commands = self.load_config(args, 2)
        report = commands.test(*commands.config.inputs)
        result = report.global_result
        color = self.passed_color(not report.significant)
        self.row(
            self.cell('global test', self.name_width),
            self.cell('statistic', self.number_width, align='right'),
            self.cell('z', self.number_width, align='right'),
            self.cell('p', self.number_width, align='right'),
        )
        self.row(
            self.cell(result.direction_rule, self.name_width),
            self.number(result.statistic),
            self.number(result.z_score),
            self.number(result.p_value, color=Fore.RED if report.significant else None),
        )
        print()
        self.row(
            self.cell(f'significant GOPs ({report.correction}, level {report.fdr})', self.name_width * 2),
            self.cell('raw p', self.number_width, align='right'),
            self.cell('adjusted', self.number_width, align='right'),
        )
        for partial in report.partial:
            if partial.significant:
                self.row(
                    self.cell(partial.gop, self.name_width * 2, color=Fore.CYAN),
                    self.number(partial.raw_p),
                    self.number(partial.adjusted_p),
                )
        print(f'{len(report.significant_gops)} of {len(report.partial)} GOPs significant')

    def classify(self, args):
        commands = self.load_config(args, 2)
        report = commands.classify(*commands.config.inputs)
        for title, value in (('accuracy', report.accuracy), ('kappa', report.kappa), ('sensitivity', report.sensitivity), ('specificity', report.specificity)):
            self.row(self.cell(title, self.name_width), self.number(value))

    def synth(self, args):
        commands = self.load_config(args, 1)
        written = commands.synth(commands.config.inputs[0])
        print(f'Wrote {len(written)} mesh(es) to {os.path.abspath(commands.config.output)}')

    def flatten(self, args):
        commands = self.load_config(args, 1)
        flat = commands.flatten(commands.config.inputs[0])
        self.row(self.cell('method', self.name_width), self.cell(flat.method.value, None, color=Fore.CYAN))
        self.row(self.cell('irregularity', self.name_width), self.number(flat.irregularity))
        self.row(self.cell('semi-flat', self.name_width), self.cell(flat.semi_flat, None))
        self.row(self.cell('flatable', self.name_width), self.cell(flat.flatable, None, color=self.passed_color(flat.flatable)))

    def straighten2d(self, args):
        commands = self.load_config(args, 1)
        model = commands.straighten2d(commands.config.inputs[0], args.count, args.degree)
        violations = [int(k) for k in model.rcc.nonzero()[0]]
        self.row(self.cell('chords', self.name_width), self.cell(len(model.chords), None))
        self.row(self.cell('curve length', self.name_width), self.number(model.curve.length))
        self.row(self.cell('curvature violations', self.name_width), self.cell(violations or 'none', None, color=self.passed_color(not violations)))
        return 1 if violations else 0

    def version(self, args):
        print(VERSION)

def main():
    sys.exit(CLI().main())

if __name__ == '__main__':
    main()
