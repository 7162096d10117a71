from sqlalchemy import Column, String, Integer, Float, Text, ForeignKey, Index, DateTime
from sqlalchemy.orm import relationship
from sqlalchemy.sql import func
from .base import Base


class ExperimentRun(Base):
    """
    One CLI or API run: what was asked for, where it stands, and the CSV it produced
    """
    __tablename__ = 'experiment_runs'

    id = Column(String(64), primary_key=True)

    # ber | exit | rho | snr | selftest
    kind = Column(String(32), nullable=False)
    channel = Column(String(255), nullable=False)
    variant = Column(String(64), nullable=True)

    # pending -> running -> completed | failed
    status = Column(String(16), nullable=False, default='pending')
    error = Column(Text, nullable=True)

    # ExperimentConfig as JSON text
    config_json = Column(Text, nullable=False)
    csv_text = Column(Text, nullable=True)
    row_count = Column(Integer, default=0, nullable=False)

    created_at = Column(DateTime(timezone=True), server_default=func.now())
    finished_at = Column(DateTime(timezone=True), nullable=True)

    ber_points = relationship("BerPointRecord", back_populates="run", cascade="all, delete-orphan")

    __table_args__ = (
        Index('idx_runs_status', 'status'),
        Index('idx_runs_kind', 'kind'),
    )


class BerPointRecord(Base):
    """
    BER of one (SNR, iteration) cell of a BER run
    """
    __tablename__ = 'ber_points'

    run_id = Column(String(64), ForeignKey('experiment_runs.id', ondelete='CASCADE'), primary_key=True)
    snr_db = Column(Float, primary_key=True)
    iteration = Column(Integer, primary_key=True)

    bit_errors = Column(Integer, nullable=False)
    bits_counted = Column(Integer, nullable=False)
    ber = Column(Float, nullable=False)
    blocks = Column(Integer, nullable=False)

    run = relationship("ExperimentRun", back_populates="ber_points")
