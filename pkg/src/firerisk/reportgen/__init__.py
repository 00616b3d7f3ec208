from .agents import (AgentFinding, Evidence, canonical_number, deviation_agent, hazard_agent,
                     importance_agent, modal_class)
from .external import BackendConfigError, ExternalBackend, MockCompletionServer
from .render import report_json, report_text
from .synthesis import (OperationalReport, build_request, invented_numbers, synthesize_report,
                        template_report)

__all__ = ["AgentFinding", "BackendConfigError", "Evidence", "ExternalBackend",
           "MockCompletionServer", "OperationalReport", "build_request", "canonical_number",
           "deviation_agent", "hazard_agent", "importance_agent", "invented_numbers",
           "modal_class", "report_json", "report_text", "synthesize_report", "template_report"]
