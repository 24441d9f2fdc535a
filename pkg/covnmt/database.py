"""
Run registry: training runs and their per-epoch metrics in SQLite.
The metric log TSV stays the primary artifact; this is a searchable index.
"""
import json
from contextlib import contextmanager
from typing import Dict, Optional

import pandas as pd
from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text, UniqueConstraint, create_engine
from sqlalchemy.orm import declarative_base, relationship, sessionmaker
from sqlalchemy.sql import func

Base = declarative_base()


class TrainingRun(Base):
    """One invocation of train"""
    __tablename__ = 'training_runs'

    id = Column(Integer, primary_key=True)
    mode = Column(String(16), nullable=False, index=True)
    objective = Column(String(16), nullable=False)
    seed = Column(Integer, nullable=False)
    config = Column(Text, nullable=False)
    status = Column(String(16), nullable=False, default='running')
    created_at = Column(DateTime, default=func.now())

    epochs = relationship("EpochMetric", back_populates="run", order_by="EpochMetric.epoch")


class EpochMetric(Base):
    """Metric log line of one epoch"""
    __tablename__ = 'epoch_metrics'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('training_runs.id'), nullable=False, index=True)
    epoch = Column(Integer, nullable=False)
    train_loss = Column(Float, nullable=False)
    dev_loss = Column(Float, nullable=False)
    dev_acc = Column(Float, nullable=False)
    cov_l1 = Column(Float, nullable=False)

    run = relationship("TrainingRun", back_populates="epochs")

    __table_args__ = (
        UniqueConstraint('run_id', 'epoch', name='unique_run_epoch'),
    )


class Database:
    """Simple database manager"""

    def __init__(self, db_path='covnmt_runs.db'):
        self.engine = create_engine(f'sqlite:///{db_path}', echo=False)
        self.Session = sessionmaker(bind=self.engine)

    def create_tables(self):
        Base.metadata.create_all(self.engine)

    @contextmanager
    def session(self):
        """Context manager for database sessions"""
        session = self.Session()
        try:
            yield session
            session.commit()
        except Exception:
            session.rollback()
            raise
        finally:
            session.close()


def open_registry(path: Optional[str]) -> Optional[Database]:
    if not path:
        return None
    db = Database(path)
    db.create_tables()
    return db


def start_run(db: Database, config) -> int:
    """Register a run and return its id"""
    settings = config.model_dump(mode='json')
    with db.session() as session:
        run = TrainingRun(mode=settings['mode'], objective=settings['objective'], seed=settings['seed'],
                          config=json.dumps(settings, sort_keys=True))
        session.add(run)
        session.flush()
        return run.id


def record_epoch(db: Database, run_id: int, row: Dict):
    with db.session() as session:
        session.add(EpochMetric(run_id=run_id, epoch=int(row['epoch']), train_loss=float(row['train_loss']),
                                dev_loss=float(row['dev_loss']), dev_acc=float(row['dev_acc']),
                                cov_l1=float(row['cov_l1'])))


def finish_run(db: Database, run_id: int, status: str):
    with db.session() as session:
        run = session.get(TrainingRun, run_id)
        if run is not None:
            run.status = status


def runs_summary(db: Database) -> pd.DataFrame:
    """Every run with its epoch count and best dev loss"""
    with db.session() as session:
        results = session.query(
            TrainingRun.id,
            TrainingRun.mode,
            TrainingRun.objective,
            TrainingRun.seed,
            TrainingRun.status,
            func.count(EpochMetric.id).label('epochs'),
            func.min(EpochMetric.dev_loss).label('best_dev_loss'),
        ).outerjoin(EpochMetric).group_by(TrainingRun.id).order_by(TrainingRun.id).all()

        return pd.DataFrame(results, columns=['run', 'mode', 'objective', 'seed', 'status', 'epochs', 'best_dev_loss'])


def epoch_history(db: Database, run_id: int) -> pd.DataFrame:
    with db.session() as session:
        results = session.query(
            EpochMetric.epoch, EpochMetric.train_loss, EpochMetric.dev_loss, EpochMetric.dev_acc, EpochMetric.cov_l1
        ).filter(EpochMetric.run_id == run_id).order_by(EpochMetric.epoch).all()

        return pd.DataFrame(results, columns=['epoch', 'train_loss', 'dev_loss', 'dev_acc', 'cov_l1'])
