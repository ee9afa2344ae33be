import json
from typing import Dict, List, Optional

import pandas as pd
from loguru import logger
from sqlalchemy import create_engine, func
from sqlalchemy.orm import sessionmaker

from config import settings
from experiments import SweepResult
from models import SweepPoint, SweepRun, create_tables
from scenario import config_digest


class ResultsManager:
    """Archive of sweep runs in SQLite"""

    def __init__(self, database_url: Optional[str] = None):
        self.engine = create_engine(database_url or settings.DATABASE_URL)
        self.SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=self.engine)
        create_tables(self.engine)

    def get_session(self):
        """Get a database session"""
        return self.SessionLocal()

    def save_sweep(self, result: SweepResult) -> int:
        """Store a sweep and its rows; returns the run id"""
        spec = result.spec
        session = self.get_session()
        try:
            run = SweepRun(
                preset=spec.preset,
                axis=spec.axis,
                modes=",".join(spec.modes),
                num_devices=spec.cfg.num_devices,
                scenario_digest=config_digest(spec.scenario_path) if spec.scenario_path else None,
                row_count=len(result.frame),
                feasible_count=result.feasible_rows,
                header="\n".join(result.header_lines),
            )
            for position, row in enumerate(result.frame.to_dict(orient="records")):
                run.rows.append(SweepPoint(
                    position=position,
                    mode=row["mode"],
                    p_max=float(row["p_max"]),
                    g_min=float(row["g_min"]),
                    weighted_sum=float(row["weighted_sum"]),
                    rate_gain=float(row["rate_gain"]),
                    status=row["status"],
                    cells=json.dumps(row),
                ))
            session.add(run)
            session.commit()
            logger.info(f"Stored sweep run {run.id} with {run.row_count} rows")
            return run.id
        except Exception as e:
            session.rollback()
            logger.error(f"Error storing sweep: {e}")
            raise
        finally:
            session.close()

    def get_runs(self) -> pd.DataFrame:
        """All stored runs, newest first"""
        session = self.get_session()
        try:
            runs = session.query(SweepRun).order_by(SweepRun.id.desc()).all()
            data = [{
                'id': run.id,
                'created_at': run.created_at.strftime('%Y-%m-%d %H:%M:%S'),
                'preset': run.preset or 'custom',
                'axis': run.axis,
                'modes': run.modes,
                'rows': run.row_count,
                'feasible': run.feasible_count,
            } for run in runs]
            return pd.DataFrame(data, columns=['id', 'created_at', 'preset', 'axis', 'modes', 'rows', 'feasible'])
        finally:
            session.close()

    def get_run_rows(self, run_id: int) -> Optional[pd.DataFrame]:
        """Rows of one run in CSV order, every cell as text"""
        session = self.get_session()
        try:
            run = session.get(SweepRun, run_id)
            if run is None:
                return None
            records = [json.loads(point.cells) for point in run.rows]
            columns = list(records[0].keys()) if records else []
            return pd.DataFrame(records, columns=columns)
        finally:
            session.close()

    def get_best_points(self, run_id: int) -> pd.DataFrame:
        """Best feasible objective per mode in one run"""
        session = self.get_session()
        try:
            results = session.query(SweepPoint.mode, func.max(SweepPoint.weighted_sum)) \
                .filter(SweepPoint.run_id == run_id, SweepPoint.status != "infeasible") \
                .group_by(SweepPoint.mode).order_by(SweepPoint.mode).all()
            return pd.DataFrame(results, columns=['mode', 'best_weighted_sum'])
        finally:
            session.close()

    def get_database_stats(self) -> Dict:
        """Get database statistics"""
        session = self.get_session()
        try:
            presets = session.query(SweepRun.preset).distinct().all()
            return {
                'total_runs': session.query(SweepRun).count(),
                'total_points': session.query(SweepPoint).count(),
                'feasible_points': session.query(SweepPoint).filter(SweepPoint.status != "infeasible").count(),
                'presets': sorted(p[0] or 'custom' for p in presets),
            }
        finally:
            session.close()
