from datetime import datetime

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.engine import Engine
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()

class SweepRun(Base):
    __tablename__ = "sweep_runs"

    id = Column(Integer, primary_key=True)
    created_at = Column(DateTime, default=datetime.now, nullable=False)
    preset = Column(String(20), nullable=True)
    axis = Column(String(10), nullable=False)
    modes = Column(String(100), nullable=False)
    num_devices = Column(Integer, nullable=False)
    scenario_digest = Column(String(64), nullable=True)  # sha256 of the scenario file
    row_count = Column(Integer, default=0)
    feasible_count = Column(Integer, default=0)
    header = Column(Text, nullable=True)  # CSV comment lines

    rows = relationship("SweepPoint", back_populates="run", cascade="all, delete-orphan",
                        order_by="SweepPoint.position")

    def __repr__(self):
        return f"<SweepRun(id={self.id}, preset={self.preset}, axis={self.axis}, rows={self.row_count})>"

class SweepPoint(Base):
    __tablename__ = "sweep_points"

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey("sweep_runs.id"), nullable=False)
    position = Column(Integer, nullable=False)  # row index in the CSV
    mode = Column(String(20), nullable=False)
    p_max = Column(Float, nullable=False)
    g_min = Column(Float, nullable=False)
    weighted_sum = Column(Float, nullable=False)
    rate_gain = Column(Float, nullable=False)
    status = Column(String(30), nullable=False)
    cells = Column(Text, nullable=False)  # full CSV row as JSON, every cell as text

    run = relationship("SweepRun", back_populates="rows")

    def __repr__(self):
        return f"<SweepPoint(run={self.run_id}, {self.mode}, p_max={self.p_max}, g_min={self.g_min})>"

def create_tables(bind: Engine):
    """Create all tables in the database"""
    Base.metadata.create_all(bind=bind)
