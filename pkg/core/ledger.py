import json
import time
import logging

from sqlalchemy.exc import OperationalError, DisconnectionError, SQLAlchemyError

from core.database import db, RunRecord

logger = logging.getLogger(__name__)


class RunLedger:
    """
    运行记录台账
    每次子命令执行后把 RunManifest 和结果摘要写入数据库，
    数据库不可用时只记日志，不影响计算本身
    """

    def __init__(self, config):
        self.config = config
        self.enabled = config.get('LEDGER_ENABLED', True)
        self.max_retries = config.get('LEDGER_MAX_RETRIES', 3)
        self.retry_delay = config.get('LEDGER_RETRY_DELAY', 2)

    def _db_operation_with_retry(self, operation, default=None):
        """带重试的数据库操作"""
        for attempt in range(self.max_retries):
            try:
                return operation()
            except (OperationalError, DisconnectionError) as e:
                db.session.rollback()
                if attempt < self.max_retries - 1:
                    logger.warning(f"数据库操作失败 (尝试 {attempt + 1}/{self.max_retries}): {e}")
                    time.sleep(self.retry_delay)
                else:
                    logger.error(f"数据库操作最终失败: {e}")
                    return default
            except SQLAlchemyError as e:
                db.session.rollback()
                logger.error(f"数据库操作失败，不再重试: {e}")
                return default

    def initialize(self):
        """
        建表；数据库不可用时关闭台账，后续运行照常计算

        Returns:
            bool: 台账是否可用
        """
        if not self.enabled:
            return False

        def _create_tables():
            db.create_all()
            return True

        if not self._db_operation_with_retry(_create_tables, default=False):
            logger.warning(f"运行台账不可用，本进程不记录运行: {self.config.get('SQLALCHEMY_DATABASE_URI')}")
            self.enabled = False
        return self.enabled

    def record_run(self, manifest, summary=None, output_path=None):
        """
        写入一条运行记录

        Args:
            manifest (RunManifest): 本次运行的清单
            summary (dict): 结果摘要
            output_path (str): 输出文件路径(如果有)

        Returns:
            RunRecord: 写入的记录；台账关闭或写入失败时为 None
        """
        if not self.enabled:
            return None

        def _create_record():
            record = RunRecord(
                command=manifest.command,
                seed=None if manifest.seed is None else str(manifest.seed),
                version=manifest.version,
                manifest=json.dumps(manifest.to_dict()),
                summary=json.dumps(summary) if summary is not None else None,
                output_path=output_path,
            )
            db.session.add(record)
            db.session.commit()
            logger.info(f"记录运行 #{record.id}: {record.command}")
            return record

        return self._db_operation_with_retry(_create_record)

    def get_runs(self, limit=None):
        """按时间倒序获取运行记录"""
        if not self.enabled:
            return []

        def _query_runs():
            query = RunRecord.query.order_by(RunRecord.created_at.desc(), RunRecord.id.desc())
            if limit:
                query = query.limit(limit)
            return query.all()

        return self._db_operation_with_retry(_query_runs, default=[])

    def get_run(self, run_id):
        return self._db_operation_with_retry(lambda: db.session.get(RunRecord, run_id))
