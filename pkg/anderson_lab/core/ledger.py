"""Run ledger: seeds, timings and certificates of every experiment run, stored in SQLite."""

import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path

import aiosqlite

logger = logging.getLogger(__name__)

SCHEMA = """
CREATE TABLE IF NOT EXISTS runs (
    run_id TEXT PRIMARY KEY,
    kind TEXT NOT NULL,
    config_hash TEXT NOT NULL,
    master_seed TEXT NOT NULL,
    sample_seeds TEXT NOT NULL,
    workers INTEGER NOT NULL,
    started_at TEXT NOT NULL,
    elapsed_seconds REAL NOT NULL,
    status TEXT NOT NULL,
    output_dir TEXT
);

CREATE TABLE IF NOT EXISTS certificates (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    run_id TEXT NOT NULL REFERENCES runs(run_id),
    name TEXT NOT NULL,
    value REAL NOT NULL,
    bound REAL,
    ok INTEGER NOT NULL
);

CREATE INDEX IF NOT EXISTS idx_runs_kind ON runs(kind);
CREATE INDEX IF NOT EXISTS idx_runs_hash ON runs(config_hash);
CREATE INDEX IF NOT EXISTS idx_certificates_run ON certificates(run_id);
"""


@dataclass
class Certificate:
    """A checked number: residual, bound slack, stderr or exactness flag."""

    name: str
    value: float
    bound: float | None = None
    ok: bool = True


@dataclass
class RunLedger:
    run_id: str
    kind: str
    config_hash: str
    master_seed: int
    sample_seeds: list[int] = field(default_factory=list)
    workers: int = 1
    started_at: datetime = field(default_factory=datetime.now)
    elapsed_seconds: float = 0.0
    status: str = "ok"
    output_dir: str = ""
    certificates: list[Certificate] = field(default_factory=list)

    def certify(self, name: str, value: float, bound: float | None = None, ok: bool | None = None):
        if ok is None:
            ok = bound is None or value <= bound
        self.certificates.append(Certificate(name, float(value), None if bound is None else float(bound), bool(ok)))

    @property
    def all_ok(self) -> bool:
        return all(c.ok for c in self.certificates)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["started_at"] = self.started_at.isoformat()
        d["all_ok"] = self.all_ok
        return d


class RunLedgerStore:
    def __init__(self, db_path: str):
        self.db_path = db_path
        self._db: aiosqlite.Connection | None = None

    async def initialize(self):
        if self.db_path != ":memory:":
            Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)
        self._db = await aiosqlite.connect(self.db_path)
        await self._db.executescript(SCHEMA)
        await self._db.commit()
        logger.info("Run ledger initialized at %s", self.db_path)

    async def close(self):
        if self._db:
            await self._db.close()

    async def insert_run(self, ledger: RunLedger):
        if not self._db:
            return
        await self._db.execute(
            """INSERT OR REPLACE INTO runs
               (run_id, kind, config_hash, master_seed, sample_seeds, workers,
                started_at, elapsed_seconds, status, output_dir)
               VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)""",
            (
                ledger.run_id,
                ledger.kind,
                ledger.config_hash,
                str(ledger.master_seed),
                json.dumps(ledger.sample_seeds),
                ledger.workers,
                ledger.started_at.isoformat(),
                ledger.elapsed_seconds,
                ledger.status,
                ledger.output_dir,
            ),
        )
        await self._db.execute("DELETE FROM certificates WHERE run_id = ?", (ledger.run_id,))
        await self._db.executemany(
            "INSERT INTO certificates (run_id, name, value, bound, ok) VALUES (?, ?, ?, ?, ?)",
            [(ledger.run_id, c.name, c.value, c.bound, int(c.ok)) for c in ledger.certificates],
        )
        await self._db.commit()

    async def get_run(self, run_id: str) -> RunLedger | None:
        if not self._db:
            return None
        cursor = await self._db.execute(
            """SELECT run_id, kind, config_hash, master_seed, sample_seeds, workers,
                      started_at, elapsed_seconds, status, output_dir
               FROM runs WHERE run_id = ?""",
            (run_id,),
        )
        row = await cursor.fetchone()
        if row is None:
            return None
        return await self._from_row(row)

    async def get_runs_by_hash(self, config_hash: str) -> list[RunLedger]:
        """Every run of one resolved configuration, oldest first."""
        if not self._db:
            return []
        cursor = await self._db.execute(
            """SELECT run_id, kind, config_hash, master_seed, sample_seeds, workers,
                      started_at, elapsed_seconds, status, output_dir
               FROM runs WHERE config_hash = ?
               ORDER BY started_at ASC""",
            (config_hash,),
        )
        rows = await cursor.fetchall()
        return [await self._from_row(row) for row in rows]

    async def _from_row(self, row) -> RunLedger:
        cursor = await self._db.execute(
            "SELECT name, value, bound, ok FROM certificates WHERE run_id = ? ORDER BY id",
            (row[0],),
        )
        certs = [Certificate(r[0], r[1], r[2], bool(r[3])) for r in await cursor.fetchall()]
        return RunLedger(
            run_id=row[0],
            kind=row[1],
            config_hash=row[2],
            master_seed=int(row[3]),
            sample_seeds=json.loads(row[4]) if row[4] else [],
            workers=row[5],
            started_at=datetime.fromisoformat(row[6]),
            elapsed_seconds=row[7],
            status=row[8],
            output_dir=row[9] or "",
            certificates=certs,
        )
