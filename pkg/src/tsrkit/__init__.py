"""tsrkit: 表格结构识别（TSR）的非神经网络部分。

结构编码（OTSL / HTML / Word 表格）、TEDS 评测、布局指针与对比监督损失、
水印过滤以及用于端到端校验的合成语料。
"""

__all__ = ["__version__", "FORMAT_VERSION"]
__version__ = "0.1.0"

# 语料 JSON-lines 的格式版本
FORMAT_VERSION = 1
