"""
Tests for consistency in the data structures of the portfolio methods and
the config. This makes sure that their parameters are valid and consistent
throughout the entire package.
"""

import unittest

from ecitarget.config import COMMANDS, OPTIONS
from ecitarget.ingest import SCHEMAS
from ecitarget.portfolio import METHODS, initialize_method
from ecitarget.portfolio.generic import SelectorBase


class DataStructuresTest(unittest.TestCase):
    def test_unique_lowercase_ids(self):
        """
        Checking that the ids in the method and schema listings are all
        unique and lowercase.
        """

        for listing in (METHODS, SCHEMAS):
            existing = []
            for element in listing:
                self.assertEqual(element.id, element.id.lower())
                self.assertTrue(element.id not in existing)
                existing.append(element.id)

    def test_imports_and_class_names_in_modules(self):
        """
        Checking that all the class names and modules listed in the
        MethodData structures exist, and that their ids match.
        """

        for method in METHODS:
            selector = initialize_method(method)
            self.assertIsInstance(selector, SelectorBase)
            self.assertEqual(selector.METHOD_ID, method.id)

    def test_compared_methods(self):
        """
        The exhaustive method is only an oracle and is left out of the
        property analyses.
        """

        compared = [m.id for m in METHODS if m.compared]
        self.assertEqual(compared, ['optimal', 'benchmark'])

    def test_command_default(self):
        self.assertIn(OPTIONS['command'].default, COMMANDS)


if __name__ == '__main__':
    unittest.main()
