import hashlib
import json
import logging
import os
from typing import Any, Dict, Mapping, Sequence

import aiofiles
import numpy as np
import pandas as pd
from reportlab.lib import colors
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.pdfbase import pdfmetrics
from reportlab.pdfbase.ttfonts import TTFont
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from cerebellar_control.utils.exceptions import ValidationError

logger = logging.getLogger(__name__)

WEIGHTS_FORMAT_VERSION = 1

# Шрифт с кириллицей для PDF, при отсутствии файла используется Helvetica
FONTS_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'fonts')
FONT_PATH = os.path.join(FONTS_DIR, 'DejaVuSans.ttf')
FONT_NAME = 'DejaVuSans'
try:
    pdfmetrics.registerFont(TTFont(FONT_NAME, FONT_PATH))
except Exception as e:
    logger.debug(f"Шрифт {FONT_PATH} недоступен: {e}")
    FONT_NAME = 'Helvetica'


def to_builtin(value: Any) -> Any:
    """Преобразование numpy-типов для JSON"""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Mapping):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    return value


def file_sha256(path: str) -> str:
    """SHA-256 содержимого файла"""
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(65536), b''):
            digest.update(chunk)
    return digest.hexdigest()


def write_json(data: Mapping[str, Any], path: str) -> str:
    """Запись JSON с сортировкой ключей"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(to_builtin(data), f, sort_keys=True, indent=2, ensure_ascii=False)
        f.write('\n')
    return path


def read_json(path: str) -> Dict[str, Any]:
    """Чтение JSON-файла"""
    if not os.path.exists(path):
        raise ValidationError(f"Файл не найден: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def write_csv(df: pd.DataFrame, path: str) -> str:
    """Запись таблицы в CSV с фиксированным форматом чисел"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    df.to_csv(path, index=False, float_format='%.9g', lineterminator='\n')
    return path


def read_csv(path: str) -> pd.DataFrame:
    """Чтение CSV; пустой или отсутствующий файл считается ошибкой"""
    if not os.path.exists(path):
        raise ValidationError(f"Файл не найден: {path}")
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError as e:
        raise ValidationError(f"Пустой файл: {path}") from e
    if df.empty:
        raise ValidationError(f"В файле нет строк данных: {path}")
    return df


def write_weights(sections: Mapping[str, Any], path: str) -> str:
    """Версионированный файл весов"""
    payload = {'format_version': WEIGHTS_FORMAT_VERSION}
    payload.update(sections)
    return write_json(payload, path)


def read_weights(path: str) -> Dict[str, Any]:
    """Чтение файла весов с проверкой версии"""
    data = read_json(path)
    if data.get('format_version') != WEIGHTS_FORMAT_VERSION:
        raise ValidationError(f"Неподдерживаемая версия файла весов: {data.get('format_version')}")
    return data


async def append_jsonl(records: Sequence[Mapping[str, Any]], path: str) -> str:
    """Дозапись строк JSON-lines"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    async with aiofiles.open(path, 'a', encoding='utf-8') as f:
        for record in records:
            await f.write(json.dumps(to_builtin(record), sort_keys=True, ensure_ascii=False) + '\n')
    return path


def export_summary_to_pdf(title: str, rows: Sequence[Mapping[str, Any]], output_path: str) -> str:
    """Экспорт сводки испытаний в PDF"""
    doc = SimpleDocTemplate(
        output_path,
        pagesize=A4,
        rightMargin=48,
        leftMargin=48,
        topMargin=48,
        bottomMargin=48
    )
    styles = getSampleStyleSheet()
    title_style = ParagraphStyle(
        'CustomTitle',
        parent=styles['Heading1'],
        fontName=FONT_NAME,
        fontSize=16,
        spaceAfter=20
    )

    elements = [Paragraph(title, title_style), Spacer(1, 12)]
    if rows:
        header = list(rows[0].keys())
        data = [header]
        for row in rows:
            data.append([f"{row[k]:.4g}" if isinstance(row[k], float) else str(row[k]) for k in header])
        table = Table(data)
        table.setStyle(TableStyle([
            ('BACKGROUND', (0, 0), (-1, 0), colors.grey),
            ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
            ('ALIGN', (0, 0), (-1, -1), 'CENTER'),
            ('FONTNAME', (0, 0), (-1, -1), FONT_NAME),
            ('FONTSIZE', (0, 0), (-1, -1), 8),
            ('BOTTOMPADDING', (0, 0), (-1, 0), 8),
            ('BACKGROUND', (0, 1), (-1, -1), colors.beige),
            ('GRID', (0, 0), (-1, -1), 1, colors.black)
        ]))
        elements.append(table)
    doc.build(elements)
    return output_path


def export_summary_to_excel(sheets: Mapping[str, pd.DataFrame], output_path: str) -> str:
    """Экспорт таблиц в Excel, по листу на таблицу"""
    with pd.ExcelWriter(output_path, engine='openpyxl') as writer:
        for sheet_name, df in sheets.items():
            df.to_excel(writer, sheet_name=sheet_name[:31], index=False)
    return output_path
