"""
Unit tests for CSV table I/O.
"""

import io
import tempfile
import unittest
import sys
from pathlib import Path

# Add parent to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pandas as pd

from utils.csv_io import SCHEMAS, read_csv, write_csv
from utils.errors import InvalidArgumentError


class TestCsvIO(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def test_full_precision_survives(self):
        """Test that awkward doubles read back bit for bit"""
        alphas = np.array([0.0, 1.0 / 3.0, np.nextafter(0.5, 1.0), 1e-300, 1.0])
        frame = pd.DataFrame({'alpha': alphas, 'beta': 1.0 - alphas})
        path = Path(self.temp_dir) / 'curve.csv'

        write_csv(frame, 'curve', path)
        loaded = read_csv(path, 'curve')

        self.assertTrue(np.array_equal(loaded['alpha'].to_numpy(), alphas))
        self.assertTrue(np.array_equal(loaded['beta'].to_numpy(), 1.0 - alphas))

    def test_header_and_column_order(self):
        """Test that the schema fixes header and order, extra columns dropped"""
        frame = pd.DataFrame({'beta': [0.5], 'alpha': [0.5], 'extra': [1]})
        stream = io.StringIO()
        write_csv(frame, 'curve', stream=stream)
        self.assertEqual(stream.getvalue().splitlines()[0], 'alpha,beta')

    def test_missing_column(self):
        """Test that a table without a schema column is rejected"""
        with self.assertRaises(InvalidArgumentError):
            write_csv(pd.DataFrame({'alpha': [0.1]}), 'curve', stream=io.StringIO())

    def test_unknown_schema(self):
        """Test that unknown schemas are rejected"""
        with self.assertRaises(InvalidArgumentError):
            write_csv(pd.DataFrame({'a': [1]}), 'nope', stream=io.StringIO())

    def test_read_rejects_other_schema(self):
        """Test that reading with the wrong schema fails"""
        path = Path(self.temp_dir) / 'plan.csv'
        write_csv(pd.DataFrame({'round': [0], 'index': [3]}), 'batch_plan', path)
        with self.assertRaises(InvalidArgumentError):
            read_csv(path, 'curve')

    def test_schemas_declared(self):
        """Test the published headers"""
        self.assertEqual(
            SCHEMAS['bounds'],
            ['M', 'kappa_shuf', 'eps_min_shuf', 'kappa_pois', 'eps_min_pois', 'sigma_threshold']
        )
        self.assertEqual(SCHEMAS['tradeoff'], ['threshold', 'alpha_hat', 'beta_hat', 'alpha_se', 'beta_se'])
        self.assertEqual(SCHEMAS['run_log'], ['round', 'batch_size', 'membership', 'update_norm', 'z_norm'])
        self.assertEqual(SCHEMAS['metrics'], ['accuracy_clean', 'accuracy_dp', 'sigma', 'M', 'C'])


if __name__ == '__main__':
    unittest.main()
