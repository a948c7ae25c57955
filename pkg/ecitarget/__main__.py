"""
This module parses the configuration, sets up the logging and runs the
requested command of the pipeline. The exit code tells how it went:

    0: success
    2: invalid configuration
    3: invalid or insufficient data
    4: the target is out of reach for some location (the max-achievable
       portfolios are still written)
"""

import os
import sys
import logging
from typing import List, Optional

from ecitarget import ConfigError, DataError, PipelineError
from ecitarget.config import Config
from ecitarget.report.pipeline import run_pipeline


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4


def run(argv: Optional[List[str]] = None,
        config_file: Optional[str] = None) -> int:
    """
    Runs the program with the given arguments and returns its exit code.
    """

    # Initialization and parsing of the config from arguments and config file
    config = Config()
    try:
        config.parse(config_file, argv)
    except ConfigError as e:
        print(f"ecitarget: {e}", file=sys.stderr)
        return EXIT_CONFIG

    # Logger initialzation with precise milliseconds handler.
    logging.basicConfig(level=logging.DEBUG if config.debug else logging.INFO,
                        format="[%(asctime)s.%(msecs)03d] %(levelname)s:"
                        " %(message)s", datefmt="%H:%M:%S")

    try:
        run_config = config.run_config()
        os.makedirs(run_config.output_dir, exist_ok=True)
        config.save_effective(os.path.join(run_config.output_dir,
                                           'config.ini'))
        pipeline = run_pipeline(run_config, extra_outputs=('config.ini',))
    except ConfigError as e:
        logging.error("Invalid configuration: %s", e)
        return EXIT_CONFIG
    except PipelineError as e:
        logging.error("%s", e)
        return EXIT_CONFIG if isinstance(e.cause, ConfigError) \
            else EXIT_DATA
    except DataError as e:
        logging.error("%s", e)
        return EXIT_DATA

    return EXIT_INFEASIBLE if pipeline.infeasible else EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == '__main__':
    main()
