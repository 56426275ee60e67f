# database.py
from datetime import datetime
import json

from flask_sqlalchemy import SQLAlchemy

db = SQLAlchemy()


class RunRecord(db.Model):
    __tablename__ = 'runs'

    id = db.Column(db.Integer, primary_key=True)
    command = db.Column(db.String(32), nullable=False)
    seed = db.Column(db.String(32))  # 64位无符号种子超出 BIGINT 范围，按字符串存
    version = db.Column(db.String(20), nullable=False)
    manifest = db.Column(db.Text, nullable=False)
    summary = db.Column(db.Text)
    output_path = db.Column(db.String(500))
    created_at = db.Column(db.DateTime, default=datetime.utcnow)

    def to_dict(self):
        return {
            'id': self.id,
            'command': self.command,
            'seed': self.seed,
            'version': self.version,
            'manifest': json.loads(self.manifest),
            'summary': json.loads(self.summary) if self.summary else None,
            'output_path': self.output_path,
            'created_at': self.created_at.strftime('%Y-%m-%d %H:%M:%S') if self.created_at else None
        }
