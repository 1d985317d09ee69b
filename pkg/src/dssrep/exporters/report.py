from typing import Iterable, List, Optional

from fpdf import FPDF
from fpdf.enums import Align, XPos, YPos

from ..gof import FitResult, GofReport, table_rows, TABLE_COLUMNS
from ..mesh_core import TriangleMesh
from ..version import VERSION
from .figures import fit_png

class FitReportPDF(FPDF):
    def set_subject_name(self, name:str):
        self.subject_name = name

    def header(self):
        self.set_font('helvetica', size=9)
        self.cell(self.epw / 2, 8, f'dssrep {VERSION}', align=Align.L)
        self.cell(0, 8, self.subject_name, align=Align.R, new_x=XPos.LMARGIN, new_y=YPos.NEXT)
        self.ln(4)

    def footer(self):
        self.set_y(-15)
        self.set_font('helvetica', size=9)
        self.cell(0, 10, f'- {self.page_no()} -', align=Align.C)

class ReportExporter():
    """Renders a one-page summary of a fit: the picture, the scores, the grid table and the settings."""

    def __init__(self, font_size:int=10):
        self.font_size = font_size

    def export(self, name:str, fit:FitResult, mesh:Optional[TriangleMesh]=None, reports:Iterable[GofReport]=(), settings:Optional[dict]=None, filename:Optional[str]=None) -> bytearray:
        """Renders the report to filename.  If filename is None, the raw results are returned instead."""
        pdf = FitReportPDF()
        pdf.set_subject_name(name)
        pdf.set_title(f'Fit of {name}')
        pdf.set_font('helvetica', size=self.font_size)
        pdf.add_page()

        self._heading(pdf, f'Fit of {name}')
        pdf.image(fit_png(fit.sheet, fit.spokes, mesh), w=pdf.epw)
        pdf.ln(4)

        report = fit.report
        self._heading(pdf, 'Goodness of fit')
        self._pairs(pdf, [
            ('degrees (sheet, spine)', f'{report.degrees[0]}, {report.degrees[1]}'),
            ('plane mode', fit.sheet.mode.value),
            ('volume coverage', f'{report.volume_coverage:.3f}'),
            ('skeletal symmetry', f'{report.skeletal_symmetry:.3f}'),
            ('average tidiness', f'{report.avg_tidiness:.3f}'),
            ('strict tidiness', f'{report.strict_tidiness:.3f}'),
            ('score 1', f'{report.score1:.3f}'),
            ('score 2', f'{report.score2:.3f}'),
            ('cross-sections', 'disjoint inside the object' if fit.rcc.passed else 'meet inside the object'),
        ])

        reports = list(reports)
        if len(reports) > 1:
            self._heading(pdf, 'Degree grid')
            self._table(pdf, TABLE_COLUMNS, [[f'{v:.3f}' if isinstance(v, float) else str(v) for v in row] for row in table_rows(reports)])

        if settings:
            self._heading(pdf, 'Settings')
            self._pairs(pdf, [(key, str(value)) for key, value in settings.items()])

        if filename is not None:
            return pdf.output(name=filename)
        else:
            return pdf.output()

    def _heading(self, pdf:FPDF, text:str) -> None:
        pdf.set_font('helvetica', style='B', size=self.font_size + 4)
        pdf.multi_cell(w=0, txt=text, align=Align.L, new_x=XPos.LMARGIN, new_y=YPos.NEXT)
        pdf.set_font('helvetica', size=self.font_size)
        pdf.ln(2)

    def _pairs(self, pdf:FPDF, pairs:List[tuple]) -> None:
        for key, value in pairs:
            pdf.cell(60, 6, key)
            pdf.cell(0, 6, value, new_x=XPos.LMARGIN, new_y=YPos.NEXT)
        pdf.ln(4)

    def _table(self, pdf:FPDF, header, rows) -> None:
        width = pdf.epw / len(header)
        pdf.set_font('helvetica', style='B', size=self.font_size - 3)
        for title in header:
            pdf.cell(width, 5, title.replace('_', ' '), border='B', align=Align.R)
        pdf.ln()
        pdf.set_font('helvetica', size=self.font_size - 3)
        for row in rows:
            for value in row:
                pdf.cell(width, 5, value, align=Align.R)
            pdf.ln()
        pdf.set_font('helvetica', size=self.font_size)
        pdf.ln(4)
