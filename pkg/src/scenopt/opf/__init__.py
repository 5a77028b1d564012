"""Adaptive DC optimal power flow under load-deviation uncertainty."""
from .model import (AdaptiveOpfDecision, InfeasibleBoxError, OpfConfig, OpfTemplate,
                    balance_residual, build_adaptive_opf, check_capacity, decision_from_solution,
                    enu_set, evaluate_dispatch, fitted_mapping, load_uncertainty, opf_posterior,
                    sample_load_scenarios, slack_adjustment, synthetic_history)
from .network import (Bus, BusType, CaseParseError, CaseValidationError, Generator, Line,
                      PowerNetwork, bundled_cases, load_case, parse_case)
