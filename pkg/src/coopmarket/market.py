"""Offers, commodities and market roles of the local exchange."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Optional, Sequence, Union


class OfferError(ValueError):
    """Raised for malformed offers or commodities."""


class Flag(enum.IntEnum):
    ASK = 0
    BID = 1


class OrderKind(enum.Enum):
    LIMIT = "limit"
    FILL_OR_KILL = "fill-or-kill"


# The grid is a single participant that sits on both sides of the market.
GRID = "grid"


@dataclass(frozen=True)
class MarketRole:
    """A market participant: a prosumer index or the grid."""

    identity: Union[int, str]

    def __post_init__(self):
        if isinstance(self.identity, str) and self.identity != GRID:
            raise OfferError(f"unknown participant {self.identity!r}")
        if isinstance(self.identity, int) and self.identity < 0:
            raise OfferError("prosumer index must be >= 0")

    @property
    def is_grid(self) -> bool:
        return self.identity == GRID

    @classmethod
    def grid(cls) -> "MarketRole":
        return cls(GRID)


@dataclass(frozen=True)
class EnergyCommodity:
    """A time series of energy quantities (kWh per interval).

    By convention the last quantity is zero, closing the delivery window.
    """

    quantities: tuple
    timestamps: tuple

    def __post_init__(self):
        q = tuple(float(x) for x in self.quantities)
        t = tuple(self.timestamps)
        object.__setattr__(self, "quantities", q)
        object.__setattr__(self, "timestamps", t)
        if len(q) != len(t):
            raise OfferError("quantities and timestamps differ in length")
        if not q:
            raise OfferError("empty commodity")
        if any(not math.isfinite(x) or x < 0 for x in q):
            raise OfferError("quantities must be finite and >= 0")
        if q[-1] != 0.0:
            raise OfferError("last quantity must be 0")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise OfferError("timestamps must be strictly increasing")

    @classmethod
    def single(cls, quantity: float, start: datetime, end: datetime) -> "EnergyCommodity":
        """One interval of delivery: ``quantity`` over [start, end)."""
        return cls((quantity, 0.0), (start, end))

    @property
    def total(self) -> float:
        return math.fsum(self.quantities)


@dataclass(frozen=True)
class MarketOffer:
    """An offer (commodity, price, flag) with the optional extensions.

    ``price``, ``quantity_count``, ``order_kind`` and ``expiry`` are kept for
    format fidelity only. Clearing accepts every offer and never reads them.
    """

    commodity: EnergyCommodity
    flag: Flag
    price: Optional[float] = None
    quantity_count: Optional[int] = None
    order_kind: OrderKind = OrderKind.LIMIT
    expiry: Optional[datetime] = None
    efficiency: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "flag", Flag(self.flag))
        if self.efficiency is not None:
            if self.flag is Flag.BID:
                raise OfferError("bids do not carry an efficiency")
            check_efficiency(self.efficiency)

    @property
    def is_bid(self) -> bool:
        return self.flag is Flag.BID

    @property
    def quantity(self) -> float:
        return self.commodity.total

    @property
    def interval(self) -> datetime:
        return self.commodity.timestamps[0]

    def to_dict(self) -> dict:
        return {
            "flag": "bid" if self.is_bid else "ask",
            "q_kwh": self.quantity,
            "t": self.interval.isoformat(),
            "eta": self.efficiency,
            "price": self.price,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, dt_hours: float = 0.25) -> "MarketOffer":
        try:
            flag = {"bid": Flag.BID, "ask": Flag.ASK}[data["flag"]]
            start = datetime.fromisoformat(data["t"])
            q = float(data["q_kwh"])
        except (KeyError, ValueError, TypeError) as exc:
            raise OfferError(f"malformed offer record: {exc}") from exc
        end = start + timedelta(hours=dt_hours)
        return cls(
            EnergyCommodity.single(q, start, end),
            flag,
            price=data.get("price"),
            efficiency=data.get("eta"),
        )


def check_efficiency(eta: float) -> float:
    if not (math.isfinite(eta) and 0.0 < eta <= 1.0):
        raise OfferError(f"round-trip efficiency {eta!r} outside (0, 1]")
    return float(eta)


def positive_part(x: float) -> float:
    """max(x, 0)."""
    if not math.isfinite(x):
        raise ValueError(f"non-finite energy {x!r}")
    return x if x > 0.0 else 0.0


def net_position(demand: float, pv: float) -> float:
    """Raw net demand before exchange and storage; > 0 buys, < 0 sells."""
    return demand - pv


def make_offer(net: float, efficiency: float, interval: datetime, dt_hours: float = 0.25) -> MarketOffer:
    """Turn a prosumer's net position for one interval into an offer.

    A positive net becomes a bid for ``net``; a negative net becomes an ask
    for ``-net`` that carries the seller's round-trip efficiency.
    Zero nets do not trade and are rejected.
    """
    if net == 0 or not math.isfinite(net):
        raise OfferError("no offer for a zero or non-finite net position")
    end = interval + timedelta(hours=dt_hours)
    if net > 0:
        return MarketOffer(EnergyCommodity.single(net, interval, end), Flag.BID)
    return MarketOffer(
        EnergyCommodity.single(-net, interval, end),
        Flag.ASK,
        efficiency=check_efficiency(efficiency),
    )


def split_offers(offers: Sequence[MarketOffer]):
    """Segregate offers into (bids, asks) by flag, keeping order."""
    bids = [o for o in offers if o.is_bid]
    asks = [o for o in offers if not o.is_bid]
    return bids, asks
