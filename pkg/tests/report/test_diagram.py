import os
import re
import math
import unittest
import tempfile

import pandas as pd

from ecitarget import DataError
from ecitarget.portfolio import optimize_portfolio
from ecitarget.portfolio.generic import make_portfolio
from ecitarget.report.diagram import (DIAGRAM_COLUMNS, diagram_rows,
                                      emit_diagram_svg, write_diagram_csv)

from tests.portfolio import effort_of


def marks(svg: str, kind: str):
    return sorted(re.findall(rf'<g id="{kind}-([^"]+)"', svg))


class DiagramTest(unittest.TestCase):
    def setUp(self):
        self.effort = effort_of([('a', 1.0, 0.75), ('b', 0.625, 0.6875),
                                 ('c', 0.5, 0.625)], [0.25])
        self.portfolio = optimize_portfolio(self.effort, 0.5)
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def draw(self, rows, name='diagram.svg', **kwargs):
        path = os.path.join(self.tmp.name, name)
        emit_diagram_svg(rows, path, **kwargs)
        with open(path) as f:
            return f.read()

    def test_rows(self):
        rows = diagram_rows(self.effort, self.portfolio)
        self.assertEqual(tuple(rows.columns), DIAGRAM_COLUMNS)
        self.assertEqual(list(rows['activity']), ['a', 'b', 'c'])
        self.assertEqual(list(rows['selected']), [True, False, False])

    def test_marks(self):
        rows = diagram_rows(self.effort, self.portfolio)
        svg = self.draw(rows, title='c', target=0.5)
        self.assertEqual(marks(svg, 'selected'), ['a'])
        self.assertEqual(marks(svg, 'candidate'), ['b', 'c'])

        nothing = make_portfolio(self.effort, 0.25, (), 'optimal')
        svg = self.draw(diagram_rows(self.effort, nothing), 'empty.svg')
        self.assertEqual(marks(svg, 'selected'), [])
        self.assertEqual(len(marks(svg, 'candidate')), 3)

    def test_deterministic(self):
        rows = diagram_rows(self.effort, self.portfolio)
        first = self.draw(rows, 'first.svg', target=0.5)
        second = self.draw(rows, 'second.svg', target=0.5)
        self.assertEqual(first, second)

    def test_infinite_effort(self):
        effort = effort_of([('a', 1.0, 0.75), ('z', math.inf, 2.0)], [0.25])
        rows = diagram_rows(effort, optimize_portfolio(effort, 0.5))
        path = os.path.join(self.tmp.name, 'diagram.csv')
        write_diagram_csv(rows, path)
        written = pd.read_csv(path)
        self.assertEqual(list(written['activity']), ['a', 'z'])
        self.assertTrue(math.isinf(written['w'][1]))

        svg = self.draw(rows)
        self.assertEqual(marks(svg, 'selected') + marks(svg, 'candidate'),
                         ['a'])

    def test_empty(self):
        rows = pd.DataFrame(columns=list(DIAGRAM_COLUMNS))
        with self.assertRaises(DataError):
            self.draw(rows)


if __name__ == '__main__':
    unittest.main()
