import platform
import socket

import psutil


def get_system_info():
    """获取记录在运行清单里的主机信息"""
    return {
        'hostname': socket.gethostname(),
        'platform': platform.platform(),
        'python': platform.python_version(),
        'cpu_count': psutil.cpu_count(),
        'cpu_count_physical': psutil.cpu_count(logical=False),
        'memory_total': psutil.virtual_memory().total,
    }


def default_workers():
    """默认并行线程数：物理核数，取不到时退回逻辑核数"""
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
