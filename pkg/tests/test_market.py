import math
from datetime import datetime

import pytest
from hypothesis import given, strategies as st

from coopmarket.market import (
    EnergyCommodity, Flag, MarketOffer, MarketRole, OfferError,
    make_offer, net_position, positive_part, split_offers,
)

T0 = datetime(2019, 7, 1, 12, 0)


@pytest.mark.parametrize("x,expected", [(3.2, 3.2), (-1.7, 0.0), (0.0, 0.0)])
def test_positive_part(x, expected):
    assert positive_part(x) == expected


def test_positive_part_rejects_nan():
    with pytest.raises(ValueError):
        positive_part(math.nan)


@pytest.mark.parametrize("d,pv,expected", [(2.0, 0.5, 1.5), (0.5, 2.0, -1.5), (1.0, 1.0, 0.0)])
def test_net_position(d, pv, expected):
    assert net_position(d, pv) == expected


def test_make_offer_bid():
    o = make_offer(1.5, 0.9, T0)
    assert o.flag is Flag.BID and o.quantity == 1.5 and o.efficiency is None


def test_make_offer_ask_carries_eta():
    o = make_offer(-1.5, 0.9, T0)
    assert o.flag is Flag.ASK and o.quantity == 1.5 and o.efficiency == 0.9


@pytest.mark.parametrize("net,eta", [(-1.5, 1.2), (-1.5, 0.0), (0.0, 0.9)])
def test_make_offer_rejects(net, eta):
    with pytest.raises(OfferError):
        make_offer(net, eta, T0)


@given(st.floats(min_value=-50, max_value=50).filter(lambda x: x != 0),
       st.floats(min_value=0.01, max_value=1.0))
def test_offer_round_trip(net, eta):
    o = make_offer(net, eta, T0)
    assert o.is_bid == (net > 0)
    assert o.quantity == abs(net)
    assert (o.efficiency is None) == o.is_bid


def test_bid_cannot_carry_efficiency():
    c = EnergyCommodity.single(1.0, T0, datetime(2019, 7, 1, 12, 15))
    with pytest.raises(OfferError):
        MarketOffer(c, Flag.BID, efficiency=0.9)


def test_commodity_invariants():
    t1 = datetime(2019, 7, 1, 12, 15)
    with pytest.raises(OfferError):
        EnergyCommodity((1.0,), (T0, t1))
    with pytest.raises(OfferError):
        EnergyCommodity((1.0, 0.5), (T0, t1))
    with pytest.raises(OfferError):
        EnergyCommodity((-1.0, 0.0), (T0, t1))
    with pytest.raises(OfferError):
        EnergyCommodity((1.0, 0.0), (t1, T0))


def test_offer_json_schema():
    o = make_offer(-2.0, 0.85, T0)
    d = o.to_dict()
    assert d == {"flag": "ask", "q_kwh": 2.0, "t": "2019-07-01T12:00:00", "eta": 0.85, "price": None}
    back = MarketOffer.from_dict(d)
    assert back.to_dict() == d


def test_split_offers_by_flag():
    offers = [make_offer(1.0, 0.9, T0), make_offer(-1.0, 0.9, T0), make_offer(2.0, 0.9, T0)]
    bids, asks = split_offers(offers)
    assert [o.quantity for o in bids] == [1.0, 2.0]
    assert len(asks) == 1


def test_roles():
    assert MarketRole.grid().is_grid
    assert not MarketRole(3).is_grid
    with pytest.raises(OfferError):
        MarketRole("utility")
