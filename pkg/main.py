"""
Entry point for the workbench.

    python main.py [--out DIR] [-s] [-d] validate SCENARIO
    python main.py [--out DIR] [-s] [-d] run SCENARIO [--depths a,b,c] [--eta X] [--eps X]
                                               [--eps0 X] [--jobs N]
    python main.py [--out DIR] [-s] [-d] render REPORT [--svg DIR]

Exit codes: 0 success, 2 input error, 3 verification failure, 4 internal numeric failure.
"""

import argparse
import logging
import os
import sys
from datetime import datetime
from pathlib import Path

import definitions
from definitions import PROJECT_ROOT
from mifs.mifs_model.exceptions import ScenarioError
from mifs.mifs_model.mifs_mode import MifsMode
from mifs.mifs_model.mifs_sequencer import MifsSequencer
from mifs.version_information import MIFS_MAJOR, MIFS_MINOR

# Created on:  10/19/26

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_VERIFICATION = 3
EXIT_NUMERIC = 4


def depth_list(text: str) -> list[int]:
    """argparse type for --depths a,b,c"""
    try:
        depths = [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'depths must be comma separated integers: {text!r}')
    if not depths or any(d < 1 for d in depths):
        raise argparse.ArgumentTypeError(f'depths must be positive integers: {text!r}')
    return depths


def run_cli(arg_list: list[str] | None = None) -> int:
    """
    Start the program
    :param arg_list: optional arg_list, sys.argv by default
    :return: the exit code
    """
    try:
        options = parse_args(arg_list=arg_list)
    except SystemExit as e:
        return EXIT_OK if e.code is None else int(e.code)
    except FileNotFoundError as e:
        print(f'Error: {e}', file=sys.stderr)
        return EXIT_INPUT

    match options.command:
        case 'validate':
            return cmd_validate(options)
        case 'run':
            return cmd_run(options)
        case 'render':
            return cmd_render(options)
    raise NotImplementedError(f'command {options.command} is not handled')


def cmd_validate(options: argparse.Namespace) -> int:
    """schema, IFS soundness, periodic orbit and homoclinic certificate of a scenario"""
    return _sequence(MifsMode.VALIDATE, options, scenario_file=options.scenario)


def cmd_run(options: argparse.Namespace) -> int:
    """validate, then build the weak curves over every depth"""
    return _sequence(
        MifsMode.RUN,
        options,
        scenario_file=options.scenario,
        depths=options.depths,
        eta=options.eta,
        eps=options.eps,
        eps0=options.eps0,
        jobs=options.jobs,
    )


def cmd_render(options: argparse.Namespace) -> int:
    """figures and curve dumps of an existing report"""
    return _sequence(MifsMode.RENDER, options, report_file=options.report, svg_dir=options.svg_dir)


def _sequence(mode: MifsMode, options: argparse.Namespace, **kwargs) -> int:
    try:
        sequencer = MifsSequencer(
            output_path=options.output_path, mode=mode, silent=options.silent, **kwargs
        )
        report = sequencer.start()
    except (ScenarioError, FileNotFoundError) as e:
        logger.error('Input error: %s', e)
        print(f'Input error: {e}', file=sys.stderr)
        return EXIT_INPUT
    except RuntimeError as e:
        logger.exception('Numeric failure')
        print(f'Numeric failure: {e}', file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        # a geometric condition broke while computing
        logger.exception('Verification failure')
        print(f'Verification failed: {e}', file=sys.stderr)
        return EXIT_INPUT if mode == MifsMode.VALIDATE else EXIT_VERIFICATION

    if not report.passed:
        print(f'Verification failed at stage: {report.failed_stage}', file=sys.stderr)
        # a scenario that does not validate is bad input
        return EXIT_INPUT if mode == MifsMode.VALIDATE else EXIT_VERIFICATION
    return EXIT_OK


def parse_args(arg_list: list[str] | None) -> argparse.Namespace:
    """
    Parse the command line args (CLA) if None is passed in (normal operation) or the arg_list,
    if provided :param arg_list: default None --> process sys.argv :return:  options Namespace
    """
    parser = argparse.ArgumentParser(prog='mifs')
    parser.add_argument(
        '-s', '--silent', help='Silent run.  No console output.', action='store_true', dest='silent'
    )
    parser.add_argument(
        '-d',
        '--debug',
        help='Set logging level to DEBUG to see debugging output in log file.',
        action='store_true',
        dest='debug',
    )
    parser.add_argument(
        '-o',
        '--out',
        help='Set the path for log and program outputs to an existing directory.  '
        'Default is time-stamped folder in output_files.',
        action='store',
        dest='output_path',
    )
    parser.add_argument(
        '-v', '--version', help='Show current mifs version', action='store_true', dest='version'
    )
    subparsers = parser.add_subparsers(dest='command')

    validate = subparsers.add_parser('validate', help='Check a scenario and its homoclinic point.')
    validate.add_argument('scenario', help='Path to the JSON scenario.')

    run = subparsers.add_parser('run', help='Run the weak curve pipeline of a scenario.')
    run.add_argument('scenario', help='Path to the JSON scenario.')
    run.add_argument('--depths', type=depth_list, help='Comma separated depths.', dest='depths')
    run.add_argument('--eta', type=float, help='Override the scaling size eta.', dest='eta')
    run.add_argument('--eps', type=float, help='Override the C1 budget.', dest='eps')
    run.add_argument('--eps0', type=float, help='Override the C0 budget.', dest='eps0')
    run.add_argument(
        '--jobs', type=int, help='Workers for the depth sweep (default: all cores).', dest='jobs'
    )

    render = subparsers.add_parser('render', help='Draw the depths of a run report.')
    render.add_argument('report', help='Path to a report written by run.')
    render.add_argument(
        '--svg', help='Folder for figures and curve dumps (default: output folder).', dest='svg_dir'
    )

    options = parser.parse_args(args=arg_list)  # dev note:  The default (if None) is sys.argv

    # handle the non-execution options and quit
    if options.version:
        print(f'mifs Version: {MIFS_MAJOR}.{MIFS_MINOR}')
        sys.exit()
    if options.command is None:
        parser.print_usage(sys.stderr)
        sys.exit(EXIT_INPUT)

    # validate the output folder if provided, or make the default
    output_path: Path
    if options.output_path:
        if not Path(options.output_path).is_dir():
            raise FileNotFoundError(
                f'The selected output path directory {options.output_path} '
                f'could not be located.'
            )
        else:
            output_path = Path(options.output_path)
    else:
        output_path = create_output_folder()
    # capture it in options
    options.output_path = output_path
    definitions.set_OUTPUT_PATH(options.output_path)

    # initialize the logging now that option & path are known...
    setup_logging(output_path=output_path, debug_level=options.debug)

    logger.debug('Received Command Line Args: %s', sys.argv[1:] if arg_list is None else arg_list)
    return options


def create_output_folder() -> Path:
    """
    create a time-stamped folder as the default catch-all for outputs
    :return: Path to default folder
    """
    output_path = Path(PROJECT_ROOT, 'output_files', datetime.now().strftime('%Y-%m-%d %H%M%Sh'))
    output_path.mkdir(parents=True, exist_ok=True)
    return output_path


def setup_logging(output_path: Path, debug_level=False):
    # set up logger
    if debug_level:
        level = logging.DEBUG
    else:
        level = logging.INFO
    logging.getLogger('matplotlib').setLevel(logging.WARNING)
    filename = 'mifs_run.log'
    logging.basicConfig(
        filename=os.path.join(output_path, filename),
        filemode='w',
        format='%(asctime)s | %(module)s | %(levelname)s | %(message)s',
        datefmt='%d-%b-%y %H:%M:%S',
        level=level,
    )
    logger.info('*** STARTING MIFS PROCESSING ***')


if __name__ == '__main__':
    sys.exit(run_cli())
