"""
Services package for the remote POVM lab.
"""
from .linalg_service import LinalgService, LinalgError, RemotePovmError
from .povm_service import PovmService, InvalidMeasurementError, NotOrthogonalEquivalentError
from .locc_service import Session, Transcript, BranchSet, ProtocolError, LocalityViolation
from .protocol_service import ProtocolService
from .report_service import ReportService, InvalidDocumentError

__all__ = [
    'LinalgService', 'LinalgError', 'RemotePovmError',
    'PovmService', 'InvalidMeasurementError', 'NotOrthogonalEquivalentError',
    'Session', 'Transcript', 'BranchSet', 'ProtocolError', 'LocalityViolation',
    'ProtocolService',
    'ReportService', 'InvalidDocumentError',
]
