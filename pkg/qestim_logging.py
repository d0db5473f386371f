# qestim_logging.py - colorlog によるログ設定
import logging

import colorlog

LOG_FORMAT = "%(log_color)s%(levelname)-8s%(reset)s %(name)s: %(message)s"

_configured = False


def setup_logging(level="INFO"):
    """ルートロガーに色付きハンドラを1つだけ取り付ける"""
    global _configured
    root = logging.getLogger("qestim")
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)
    root.setLevel(level)
    if not _configured:
        handler = colorlog.StreamHandler()
        handler.setFormatter(colorlog.ColoredFormatter(
            LOG_FORMAT,
            log_colors={
                'DEBUG': 'cyan',
                'INFO': 'green',
                'WARNING': 'yellow',
                'ERROR': 'red',
                'CRITICAL': 'bold_red',
            }))
        root.addHandler(handler)
        root.propagate = False
        _configured = True
    return root


def get_logger(name):
    """'qestim.<name>' 配下のロガーを返す"""
    return logging.getLogger(f"qestim.{name}")
