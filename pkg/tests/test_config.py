import os
import sys
import unittest
import unittest.mock
import configparser

from ecitarget import ConfigError
from ecitarget.config import OPTIONS, Argument, ConfigOption, Config


# Using a dummy config file
TEST_PATH = 'test.ini'


class ConfigTest(unittest.TestCase):
    def setUp(self):
        super().setUp()

        # Empty arguments
        self.config = Config()
        try:
            os.remove(TEST_PATH)
        except FileNotFoundError:
            pass

        with unittest.mock.patch('sys.argv', ['']):
            self.config.parse(config_file=TEST_PATH)

    def tearDown(self):
        for path in (TEST_PATH, 'effective.ini'):
            try:
                os.remove(path)
            except FileNotFoundError:
                pass

    def test_order(self):
        """
        The order should always be:
        __setattr__ > arguments > environment > config file > defaults
        """

        attr = 'output_dir'
        arg = '--output-dir'
        section = OPTIONS[attr].section

        # Default
        with unittest.mock.patch.dict(os.environ, {}, clear=True):
            with unittest.mock.patch('sys.argv', ['']):
                self.config.parse(TEST_PATH)
            self.assertEqual(self.config.output_dir, OPTIONS[attr].default)

            # Config file
            self.config.write_file(section, attr, 'file')
            with unittest.mock.patch('sys.argv', ['']):
                self.config.parse(TEST_PATH)
            self.assertEqual(self.config.output_dir, 'file')

        # Environment
        with unittest.mock.patch.dict(os.environ,
                                      {'ECITARGET_OUTPUT_DIR': 'env'}):
            self.assertEqual(self.config.output_dir, 'env')

            # Arguments
            args = [sys.argv[0], f"{arg}=args"]
            with unittest.mock.patch('sys.argv', args):
                self.config.parse(TEST_PATH)
            self.assertEqual(self.config.output_dir, 'args')

            # __setattr__
            setattr(self.config, attr, '__setattr__')
            self.assertEqual(self.config.output_dir, '__setattr__')

            # Arguments again, the value set with __setattr__ stays
            args = [sys.argv[0], f"{arg}=not_this_value"]
            with unittest.mock.patch('sys.argv', args):
                self.config.parse(TEST_PATH)
            self.assertEqual(self.config.output_dir, '__setattr__')

    def test_argv_parameter(self):
        self.config.parse(TEST_PATH, ['calibrate', '--tau', '3',
                                      '--target-eci', '0.5'])
        self.assertEqual(self.config.command, 'calibrate')
        self.assertEqual(self.config.tau, 3)
        self.assertEqual(self.config.target_eci, 0.5)

        with self.assertRaises(SystemExit):
            self.config.parse(TEST_PATH, ['not-a-command'])

    def test_arguments_and_options_consistency(self):
        """
        Makes sure that all arguments in the options are equivalent to their
        name in the config file. This is not done automatically in the config
        file to simplify it, but it should be checked.
        """

        for name, option in OPTIONS.items():
            # Not all options are arguments
            if not isinstance(option, Argument):
                continue

            # Checking the number of arguments
            self.assertTrue(len(option.args) > 0)
            self.assertTrue(len(option.args) <= 2)

            # The positional command has a single name without dashes
            if not option.args[0].startswith('-'):
                self.assertEqual(option.args, (name,))
                continue

            # Arguments formatting is valid
            if len(option.args) == 2:
                self.assertTrue(option.args[0].startswith('-'))
            self.assertTrue(option.args[-1].startswith('--'))

            # Consistency with the arguments: converting it to an option:
            # --output-dir -> output_dir. If 'store_false' is used, it
            # should have a `no` as the prefix to indicate it.
            arg = option.args[-1][2:].replace('-', '_')
            if option.arg_action == 'store_false':
                self.assertTrue(arg.startswith('no_'))
                arg = arg[3:]
            self.assertEqual(arg, name)

            # If it's an argument, the description and arg_action shouldn't be
            # empty.
            self.assertNotEqual(option.description, '')
            self.assertNotEqual(option.arg_action, '')

    def test_argument_actions(self):
        """
        Makes sure that the argument actions make sense.
        """

        for option in OPTIONS.values():
            if not isinstance(option, Argument):
                continue

            # store_true and store_false should be of type boolean
            if option.arg_action in ('store_true', 'store_false'):
                self.assertEqual(option.type, bool)

    def test_option_defaults(self):
        """
        Checks that the default value is of the type indicated or None.
        """

        for option in OPTIONS.values():
            if option.default is not None:
                self.assertIsInstance(option.default, option.type)

    def test_write(self):
        """
        Check if the config file is modified correctly.
        """

        # The non-existing section should be created with write_file
        self.config.write_file('Test', 'test_attr', 'test_value')
        conf = configparser.ConfigParser()
        conf.read(TEST_PATH)
        self.assertEqual(conf['Test']['test_attr'], 'test_value')

        # With the __setattr__ implementation
        setattr(self.config, 'panel', 'data/trade.csv')
        self.assertEqual(self.config.panel, 'data/trade.csv')
        conf = configparser.ConfigParser()
        conf.read(TEST_PATH)
        self.assertEqual(conf['Data']['panel'], 'data/trade.csv')

    def test_default_returned(self):
        """
        Checking that the default value is returned when the value in the
        file is empty, rather than None:

        [Target]
        benchmark =
        """

        for name, opt in OPTIONS.items():
            if not isinstance(opt, ConfigOption):
                continue
            with open(self.config._path, 'w') as configfile:
                configfile.write(f"[{opt.section}]\n{name} =\n")
            with unittest.mock.patch('sys.argv', ['']):
                self.config.parse(TEST_PATH)
            self.assertEqual(getattr(self.config, name), opt.default)

    def test_invalid_type_in_file(self):
        with open(self.config._path, 'w') as configfile:
            configfile.write("[Model]\ntau = five\n")
        self.config.parse(TEST_PATH, [])
        with self.assertRaises(ConfigError):
            self.config.tau

    def test_run_config(self):
        self.config.parse(TEST_PATH, ['--target-delta', '0.1', '--schema',
                                      'payroll', '-l', 'b,a,b'])
        run = self.config.run_config()
        self.assertEqual(run.target.kind, 'delta')
        self.assertEqual(run.target.value, 0.1)
        self.assertEqual(run.locations, ('a', 'b'))
        # Schema defaults for the filters
        self.assertEqual(run.filters.min_location_total, 1e5)
        self.assertIsNone(run.filters.min_population)
        self.assertEqual(run.filters.min_activity_total, 1.5e5)
        self.assertEqual(run.growth_periods, ((1999, 2009), (2009, 2019)))
        self.assertEqual(run.sweep_tau, tuple(range(1, 10)))
        self.assertEqual(run.horizon, None)

    def test_run_config_errors(self):
        invalid = (
            ['--target-delta', '0.1', '--target-eci', '1.0'],
            ['--tau', '10', '--delta-t', '10'],
            ['--tau', '0'],
            ['--schema', 'services'],
            ['--pricing', 'past'],
            ['--window', '0'],
            ['--sequence-targets', '0.3,0.2'],
            ['--growth-periods', '2009-1999'],
            ['--sweep-tau', '1-x'],
        )
        for argv in invalid:
            self.config.parse(TEST_PATH, argv)
            with self.assertRaises(ConfigError, msg=argv):
                self.config.run_config()

    def test_save_effective(self):
        self.config.parse(TEST_PATH, ['--target-eci', '0.7', '--no-benchmark',
                                      '-o', 'somewhere'])
        self.config.save_effective('effective.ini')
        conf = configparser.ConfigParser()
        conf.read('effective.ini')
        self.assertEqual(conf['Target']['target_eci'], '0.7')
        self.assertEqual(conf['Target']['benchmark'], 'False')
        self.assertNotIn('output_dir', conf['Report'])


if __name__ == '__main__':
    unittest.main()
