"""ngnbill: convergent rating and billing engine for multi-service networks.

Pipeline: parse usage records -> rate against a tariff plan (with QoS
rebates, location/network modifiers and content fees) -> aggregate
invoices with bundles and taxes -> settle across operators.
"""

from .billing import Invoice, Period, PeriodMismatch, aggregate_invoice
from .content import (ContentCatalog, ContentItem, ContractStatus,
                      CredentialSet, ServiceContract, View, content_charge,
                      identify, negotiate, resolve_view)
from .rating import RatedCharge, allocate_operators, qos_rebate, rate_record
from .records import (OperatorSegment, PaymentOption, QoSMetrics, ServiceType,
                      SwitchingMode, UsageRecord, parse_udr_stream,
                      validate_record)
from .settlement import SettlementReport, settle, settle_uniform_duration
from .simulate import SimConfig, SplitMix64
from .tariff import (NoMatchingPolicy, Policy, Selector, TariffPlan,
                     load_plan, select_policy, unit_price, validate_plan)

__version__ = "0.1.0"
