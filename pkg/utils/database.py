"""
Run ledger: an optional sqlite record of command runs and experiment rows
"""

import sqlite3
from pathlib import Path
from typing import Any, Dict, List, Optional
import logging

import simplejson

from .config import config
from .formats import RunManifest, dumps_json

logger = logging.getLogger(__name__)


class RunDatabase:
    """sqlite ledger of runs and their experiment rows"""

    def __init__(self, db_path: Optional[str] = None):
        """Initialize the ledger at db_path or at the configured RUN_LEDGER"""
        if db_path is None:
            db_path = config.get_ledger_path()
        if not db_path:
            raise ValueError("No run ledger configured (set RUN_LEDGER or pass --ledger)")

        self.db_path = db_path
        self._ensure_data_directory()
        self._initialize_database()

    def _ensure_data_directory(self):
        """Ensure the ledger directory exists"""
        Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)

    def _initialize_database(self):
        """Create tables and indexes if missing"""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()

            cursor.execute('''
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    command TEXT NOT NULL,
                    seed TEXT NOT NULL,
                    version TEXT,
                    rng TEXT,
                    config TEXT,     -- JSON config echo
                    artifacts TEXT,  -- JSON {file name: sha256}
                    wall_time REAL,
                    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
                )
            ''')

            cursor.execute('''
                CREATE TABLE IF NOT EXISTS experiment_rows (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id INTEGER NOT NULL,
                    method TEXT NOT NULL,
                    epsilon REAL NOT NULL,
                    rep INTEGER NOT NULL,
                    v_s REAL,
                    gamma REAL,
                    size INTEGER,
                    t_c REAL,
                    t_s REAL,
                    FOREIGN KEY (run_id) REFERENCES runs (id)
                )
            ''')

            cursor.execute('CREATE INDEX IF NOT EXISTS idx_runs_command ON runs(command)')
            cursor.execute('CREATE INDEX IF NOT EXISTS idx_rows_run ON experiment_rows(run_id, method, epsilon)')

            conn.commit()
            logger.debug(f"Run ledger ready at {self.db_path}")

    def record_run(self, manifest: RunManifest, wall_time: Optional[float] = None) -> int:
        """Insert one run; returns its id"""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute('''
                INSERT INTO runs (command, seed, version, rng, config, artifacts, wall_time)
                VALUES (?, ?, ?, ?, ?, ?, ?)
            ''', (
                manifest.command,
                str(manifest.seed),  # seeds may exceed sqlite's signed 64-bit range
                manifest.version,
                manifest.rng,
                dumps_json(manifest.config),
                dumps_json(manifest.artifacts),
                wall_time,
            ))
            run_id = cursor.lastrowid
            conn.commit()
            logger.info(f"Recorded {manifest.command} run in ledger (ID: {run_id})")
            return run_id

    def record_rows(self, run_id: int, rows: List[Any]) -> None:
        """Insert experiment report rows under a run"""
        with sqlite3.connect(self.db_path) as conn:
            conn.executemany('''
                INSERT INTO experiment_rows (run_id, method, epsilon, rep, v_s, gamma, size, t_c, t_s)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)
            ''', [
                (run_id, r.method, r.epsilon, r.rep, r.v_s, r.gamma, r.size, r.t_c, r.t_s)
                for r in rows
            ])
            conn.commit()

    def get_runs(self, command: Optional[str] = None, limit: int = 20) -> List[Dict[str, Any]]:
        """Most recent runs first"""
        with sqlite3.connect(self.db_path) as conn:
            conn.row_factory = sqlite3.Row
            cursor = conn.cursor()
            sql = 'SELECT * FROM runs'
            params: List[Any] = []
            if command:
                sql += ' WHERE command = ?'
                params.append(command)
            sql += ' ORDER BY id DESC LIMIT ?'
            params.append(limit)
            cursor.execute(sql, params)

            runs = []
            for row in cursor.fetchall():
                run = dict(row)
                run['config'] = simplejson.loads(run['config'] or '{}')
                run['artifacts'] = simplejson.loads(run['artifacts'] or '{}')
                runs.append(run)
            return runs

    def get_rows(self, run_id: int) -> List[Dict[str, Any]]:
        """Experiment rows of one run"""
        with sqlite3.connect(self.db_path) as conn:
            conn.row_factory = sqlite3.Row
            cursor = conn.execute(
                'SELECT method, epsilon, rep, v_s, gamma, size, t_c, t_s FROM experiment_rows '
                'WHERE run_id = ? ORDER BY id', (run_id,))
            return [dict(row) for row in cursor.fetchall()]
