import csv
import io
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from core.montecarlo import TrialRecord
from utils.system_info import get_system_info

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ('pair', 'first', 'second')


def parse_numbers(text: str, count: int) -> List[float]:
    """
    解析逗号分隔的实数

    Args:
        text (str): 例如 "0,0,1"
        count (int): 期望的个数

    Raises:
        ValueError: 个数不对或者无法转换为实数
    """
    parts = [p.strip() for p in str(text).split(',')]
    if len(parts) != count:
        raise ValueError(f"expected {count} comma-separated numbers, got {text!r}")
    return [float(p) for p in parts]


class DataFormatter:
    """数据格式化工具"""

    @staticmethod
    def format_number(value: Optional[float]) -> str:
        """表格和 CSV 里的数值统一保留 9 位有效数字"""
        if value is None:
            return '-'
        if isinstance(value, bool):
            return 'true' if value else 'false'
        if isinstance(value, int):
            return str(value)
        return f"{value:.9g}"

    @staticmethod
    def format_table(rows: List[Dict[str, Any]], columns: List[str]) -> str:
        """左对齐的纯文本表格"""
        cells = [[DataFormatter.format_number(row.get(c)) if not isinstance(row.get(c), str) else row[c]
                  for c in columns] for row in rows]
        widths = [max(len(c), *(len(r[i]) for r in cells)) if cells else len(c) for i, c in enumerate(columns)]
        lines = ['  '.join(c.ljust(w) for c, w in zip(columns, widths))]
        lines.append('  '.join('-' * w for w in widths))
        for r in cells:
            lines.append('  '.join(v.ljust(w) for v, w in zip(r, widths)))
        return '\n'.join(lines)


def export_data(data: Any, format_type: str = 'json') -> str:
    """
    导出数据

    json: 完整双精度 (float 的 repr 可以无损回读)
    csv: data 必须是字典列表，第一行的键作为表头，数值保留 9 位有效数字
    """
    if format_type == 'json':
        return json.dumps(data, indent=2, ensure_ascii=False, default=str)
    if format_type == 'csv':
        if not isinstance(data, list) or not data:
            raise ValueError("csv export needs a non-empty list of rows")
        headers = list(data[0].keys())
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(headers)
        for item in data:
            writer.writerow([DataFormatter.format_number(item.get(h)) for h in headers])
        return buffer.getvalue()
    raise ValueError(f"unknown export format {format_type!r}")


def write_text(path: str, text: str) -> None:
    """写文件，父目录不存在时报 OSError，由调用方决定退出码"""
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(text)
    logger.info(f"已写入 {path}")


def write_records_csv(records, path: str) -> int:
    """把 TrialRecord 序列写为 CSV (pair,first,second)，返回条数"""
    count = 0
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(RECORD_COLUMNS)
        for record in records:
            writer.writerow([record.pair, int(record.first_outcome), int(record.second_outcome)])
            count += 1
    logger.info(f"已写入 {count} 条试验记录到 {path}")
    return count


def read_records_csv(path: str) -> List[TrialRecord]:
    """
    读取试验记录 CSV

    每行一次试验，first/second 取 +1 或 -1，可以来自任意二值响应的实验；
    缺格或取值非法都报 ValueError

    Raises:
        ValueError: 缺列、缺格或者取值非法
    """
    records = []
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        missing = set(RECORD_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"records file is missing column(s): {', '.join(sorted(missing))}")
        for line_no, row in enumerate(reader, start=2):
            try:
                records.append(TrialRecord(
                    pair=row['pair'].strip().upper(),
                    first_outcome=int(row['first']),
                    second_outcome=int(row['second']),
                ))
            except (TypeError, ValueError, AttributeError) as e:
                raise ValueError(f"{path}:{line_no}: {e}") from e
    return records


@dataclass
class RunManifest:
    """
    运行清单：子命令名、完整解析后的配置、版本、种子和时间戳

    config 可以直接作为 --config 文件回放，得到相同的输出
    """
    command: str
    config: Dict[str, Any]
    version: str
    seed: Optional[int] = None
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    host: Dict[str, Any] = field(default_factory=get_system_info)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'config': self.config,
            'version': self.version,
            'seed': self.seed,
            'timestamp': self.timestamp,
            'host': self.host,
        }

    def write(self, path: str) -> str:
        write_text(path, export_data(self.to_dict(), 'json'))
        return path


def manifest_path_for(output_path: str) -> str:
    """输出文件旁边的清单路径: <output>.manifest.json"""
    return f"{output_path}.manifest.json"


def load_json_file(path: str) -> Any:
    with open(path, encoding='utf-8') as f:
        return json.load(f)


