"""
自相似多方位勢流工具
主程式入口
"""

import logging
import os
import sys
from importlib.machinery import SourceFileLoader


# ==================== 嘗試從外部載入 config.py ====================
CONFIG_SOURCE = "預設參數"  # 全域變數，記錄 config 來源

if getattr(sys, 'frozen', False):
    config_path = os.path.join(os.path.dirname(sys.executable), "config.py")
else:
    config_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config.py")

if os.path.exists(config_path):
    try:
        config_module = SourceFileLoader("config", config_path).load_module()
        sys.modules['config'] = config_module
        CONFIG_SOURCE = "外部參數檔案"
    except Exception as e:
        print(f"警告: 外部 config.py 載入失敗 ({e})，使用預設參數", file=sys.stderr)
        import config as config_module
else:
    import config as config_module

AppConfig = config_module.AppConfig
# ===================================================================


def setup_path():
    """設定 Python 路徑"""
    app_dir = config_module.get_app_base_dir()
    if app_dir not in sys.path:
        sys.path.insert(0, app_dir)
    return app_dir


def setup_logging(verbose: bool = False):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format=AppConfig.LOG_FORMAT)


def main(argv=None) -> int:
    """主程式入口"""
    setup_path()
    argv = sys.argv[1:] if argv is None else argv
    setup_logging('--verbose' in argv or '-v' in argv)
    logging.getLogger(__name__).debug(f"配置來源: {CONFIG_SOURCE}")

    from cli import run
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
