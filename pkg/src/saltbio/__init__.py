"""Biometric-plus-salt server authentication toolkit."""

from .audit_report import AuditLog, AuthEvent, Outcome, ReportSummary, consolidate, eod_report, pct_redundancy
from .auth_core import AuthResult, EnrollmentRecord, TemplateStore, enroll, expected_template, login, refresh_templates
from .biometric import BiometricSample, FeatureTemplate, credential_bits, feature_bits, fuse, match
from .bitcodec import BitString, decode_4b5b, encode_4b5b, from_bits, to_bits
from .errors import SaltbioError
from .salt_token import SaltDevice, code_at, validate
from .tier_cipher import PipelineConfig, RsaParams, StageTrace, encrypt_password, keygen, sine_tail, template_from_bits

__version__ = "0.1.0"
