#include "psmt/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace psmt {

namespace {
struct RoundLimit {};
}  // namespace

bool same_values(const Payload& a, const Payload& b)
{
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i].v != b[i].v) return false;
    return true;
}

Payload pack(std::initializer_list<FieldElement> xs)
{
    Payload p;
    for (const auto& x : xs) p.push_back(to_word(x));
    return p;
}

Payload pack(const std::vector<FieldElement>& xs)
{
    Payload p;
    for (const auto& x : xs) p.push_back(to_word(x));
    return p;
}

Payload pack_symbol(Symbol s) { return {Word{uint32_t(s), {}}}; }

Reader::Reader(const FieldSpec& f, const std::optional<Payload>& p) : f_(&f)
{
    if (p) {
        words_ = *p;
        present_ = true;
    } else {
        malformed_ = true;
    }
}

FieldElement Reader::elem()
{
    if (pos_ >= words_.size() || !f_->contains(words_[pos_].v)) {
        malformed_ = true;
        ++pos_;
        return f_->zero();
    }
    const Word& w = words_[pos_++];
    return FieldElement(*f_, w.v, w.t);
}

std::vector<FieldElement> Reader::elems(size_t n)
{
    std::vector<FieldElement> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) out.push_back(elem());
    return out;
}

Symbol Reader::symbol()
{
    if (pos_ >= words_.size()) {
        malformed_ = true;
        ++pos_;
        return Symbol::None;
    }
    uint32_t v = words_[pos_++].v;
    if (v >= 1 && v <= uint32_t(Symbol::Help)) return Symbol(v);
    malformed_ = true;
    return Symbol::None;
}

size_t Reader::remaining() const { return pos_ < words_.size() ? words_.size() - pos_ : 0; }

std::vector<int> Network::forward() const
{
    std::vector<int> out;
    for (size_t i = 0; i < channels.size(); ++i)
        if (channels[i].dir == Direction::AB && !channels[i].ideal) out.push_back(int(i));
    return out;
}

std::vector<int> Network::backward() const
{
    std::vector<int> out;
    for (size_t i = 0; i < channels.size(); ++i)
        if (channels[i].dir == Direction::BA && !channels[i].ideal) out.push_back(int(i));
    return out;
}

Network shared_path_network(size_t forward, size_t backward, size_t shared)
{
    if (shared > backward || shared > forward) throw ParamError("more shared paths than paths");
    Network net;
    for (size_t i = 0; i < forward; ++i) {
        int node = int(net.node_names.size());
        net.node_names.push_back("p" + std::to_string(i + 1));
        net.channels.push_back({Direction::AB, int(i), "p" + std::to_string(i + 1), {node}, {}, false, 0.0});
    }
    for (size_t j = 0; j < backward; ++j) {
        size_t from_end = backward - j;  // 1-based distance from the last backward path
        int node;
        if (from_end <= shared) {
            node = int(forward - from_end);
        } else {
            node = int(net.node_names.size());
            net.node_names.push_back("q" + std::to_string(j + 1));
        }
        net.channels.push_back({Direction::BA, int(j), "q" + std::to_string(j + 1), {node}, {}, false, 0.0});
    }
    return net;
}

Network path_network(size_t forward, size_t backward) { return shared_path_network(forward, backward, 0); }

Network channels_network(size_t n) { return path_network(n, 0); }

bool Transcript::operator==(const Transcript& o) const
{
    if (rounds != o.rounds || messages.size() != o.messages.size()) return false;
    auto eq = [](const std::optional<Payload>& a, const std::optional<Payload>& b) {
        return a.has_value() == b.has_value() && (!a || same_values(*a, *b));
    };
    for (size_t i = 0; i < messages.size(); ++i) {
        const auto& x = messages[i];
        const auto& y = o.messages[i];
        if (x.round != y.round || x.key != y.key || !eq(x.sent, y.sent) || !eq(x.delivered, y.delivered))
            return false;
    }
    return true;
}

namespace {

bool meets(const NodeSet& a, const NodeSet& b)
{
    for (int x : a)
        if (std::binary_search(b.begin(), b.end(), x)) return true;
    return false;
}

bool channel_controlled(const Channel& c, const NodeSet& corrupted)
{
    return !c.ideal && meets(c.carriers, corrupted);
}

bool channel_observed(const Channel& c, const NodeSet& corrupted)
{
    if (corrupted.empty()) return false;
    return c.ideal || meets(c.carriers, corrupted) || meets(c.observers, corrupted);
}

}  // namespace

AdversaryView project_view(const Transcript& t, const Network& net, const NodeSet& corrupted)
{
    AdversaryView v;
    v.corrupted = corrupted;
    for (const auto& m : t.messages)
        if (m.sent && channel_observed(net.channels.at(m.key.channel), corrupted))
            v.messages.push_back({m.round, m.key, *m.sent});
    return v;
}

FieldElement Coins::draw()
{
    const uint32_t index = next_++;
    const uint64_t q = f_->order();
    uint32_t value;
    if (auto it = forced_.find(index); it != forced_.end()) {
        value = it->second;
    } else {
        uint64_t s = derive_seed(seed_, index, 0x636f696e);
        const uint64_t floor = (0 - q) % q;
        uint64_t x;
        do {
            x = splitmix64(s++);
        } while (x < floor);
        value = uint32_t(x % q);
    }
    return FieldElement(*f_, value, tracking_ ? Taint::coin(index) : Taint{});
}

uint64_t Coins::below(uint64_t n)
{
    uint64_t s = derive_seed(seed_, extra_++, 0x65787472);
    const uint64_t floor = (0 - n) % n;
    uint64_t x;
    do {
        x = splitmix64(s++);
    } while (x < floor);
    return x % n;
}

bool RoundControl::controls(int channel) const { return session->controlled(channel); }

Session::Session(const FieldSpec& f, const Network& net, size_t k, Coins& coins, const AdversarySpec& adv,
                 uint64_t channel_seed, StrategySetup setup)
    : f_(&f), net_(&net), k_(k), coins_(&coins), mode_(adv.mode), corrupted_(adv.corrupted),
      adv_rng_(adv.seed), channel_rng_(channel_seed)
{
    if (adv.strategy) {
        strategy_ = adv.strategy();
        setup.network = &net;
        setup.field = &f;
        setup.k = k;
        if (auto chosen = strategy_->corrupt(setup, adv_rng_)) corrupted_ = *chosen;
    }
    std::sort(corrupted_.begin(), corrupted_.end());
    corrupted_.erase(std::unique(corrupted_.begin(), corrupted_.end()), corrupted_.end());
    if (corrupted_.size() > k)
        throw PreconditionError("adversary corrupts " + std::to_string(corrupted_.size()) +
                                " nodes against bound " + std::to_string(k));
    for (int x : corrupted_)
        if (x < 0 || size_t(x) >= net.node_count())
            throw PreconditionError("corrupted node " + std::to_string(x) + " is not an internal node");
    view_.corrupted = corrupted_;
}

Session::~Session() = default;

bool Session::controlled(int channel) const
{
    return channel_controlled(net_->channels.at(channel), corrupted_);
}

bool Session::observed(int channel) const
{
    return channel_observed(net_->channels.at(channel), corrupted_);
}

void Session::send(int channel, int slot, Payload p)
{
    if (channel < 0 || size_t(channel) >= net_->channels.size())
        throw ParamError("unknown channel " + std::to_string(channel));
    ChannelKey key{channel, slot};
    if (pending_.count(key)) throw ParamError("two messages on one channel slot in a round");
    pending_[key] = std::move(p);
}

Inbox Session::exchange()
{
    if (stop_after_ > 0 && round_ >= stop_after_) throw RoundLimit{};
    ++round_;
    std::map<ChannelKey, std::optional<Payload>> grabbed;
    for (const auto& [key, p] : pending_) {
        if (observed(key.channel)) {
            view_.messages.push_back({round_, key, p});
            for (const Word& w : p) known_ |= w.t;
        }
        if (controlled(key.channel)) grabbed[key] = p;
    }
    if (mode_ == AdversarySpec::Active && strategy_) {
        RoundControl rc;
        rc.round = round_;
        rc.session = this;
        rc.view = &view_;
        rc.controlled = &grabbed;
        rc.rng = &adv_rng_;
        strategy_->on_round(rc);
        // Whatever the adversary writes is a function of what it has seen.
        if (!known_.empty())
            for (auto& [key, p] : grabbed)
                if (p)
                    for (Word& w : *p) w.t |= known_;
    }

    std::set<ChannelKey> keys;
    for (const auto& [key, p] : pending_) keys.insert(key);
    for (const auto& [key, p] : grabbed)
        if (controlled(key.channel)) keys.insert(key);

    Inbox inbox;
    for (const auto& key : keys) {
        RoundMessage m;
        m.round = round_;
        m.key = key;
        if (auto it = pending_.find(key); it != pending_.end()) m.sent = it->second;
        const Channel& c = net_->channels[key.channel];
        if (controlled(key.channel)) {
            m.delivered = grabbed[key];
        } else if (c.ideal) {
            m.delivered = idealized_reliable_channel(*m.sent, c.failure, channel_rng_);
        } else {
            m.delivered = m.sent;
        }
        if (m.delivered) inbox[key] = *m.delivered;
        transcript_.messages.push_back(std::move(m));
    }
    transcript_.rounds = round_;
    pending_.clear();
    return inbox;
}

std::optional<Payload> lookup(const Inbox& in, int channel, int slot)
{
    auto it = in.find({channel, slot});
    if (it == in.end()) return std::nullopt;
    return it->second;
}

Reader read(const Session& s, const Inbox& in, int channel, int slot)
{
    return Reader(s.field(), lookup(in, channel, slot));
}

std::optional<Payload> majority_vote(const Inbox& in, const std::vector<int>& channels, int slot)
{
    std::vector<std::pair<Payload, size_t>> tally;
    for (int c : channels) {
        auto p = lookup(in, c, slot);
        if (!p) continue;
        auto it = std::find_if(tally.begin(), tally.end(), [&](const auto& t) { return same_values(t.first, *p); });
        if (it == tally.end())
            tally.push_back({*p, 1});
        else
            ++it->second;
    }
    if (tally.empty()) return std::nullopt;
    // Entries are in first-seen order, so max_element keeps the earliest on ties.
    auto best = std::max_element(tally.begin(), tally.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    return best->first;
}

void require_reliable(const Session& s, const std::vector<int>& channels)
{
    if (channels.size() < 2 * s.k() + 1)
        throw PreconditionError("reliable transmission needs " + std::to_string(2 * s.k() + 1) +
                                " channels, have " + std::to_string(channels.size()));
}

Payload reliable_broadcast(Session& s, const std::vector<int>& channels, const Payload& p, int slot)
{
    require_reliable(s, channels);
    for (int c : channels) s.send(c, slot, p);
    Inbox in = s.exchange();
    return majority_vote(in, channels, slot).value_or(Payload{});
}

std::optional<Payload> idealized_reliable_channel(const Payload& p, double delta_r, Rng& rng)
{
    if (delta_r < 0 || delta_r >= 0.5) throw ParamError("delta_r must lie in [0, 1/2)");
    if (delta_r > 0 && rng.unit() < delta_r) return std::nullopt;
    return p;
}

// ---- strategies ----

AdversarySpec no_adversary() { return {}; }

AdversarySpec passive_observer(NodeSet corrupted, uint64_t seed)
{
    AdversarySpec a;
    a.mode = AdversarySpec::Passive;
    a.corrupted = std::move(corrupted);
    a.seed = seed;
    a.name = "passive_observer";
    return a;
}

namespace {

class RandomTamperer : public Strategy {
public:
    void on_round(RoundControl& rc) override
    {
        const FieldSpec& f = rc.session->field();
        for (auto& [key, p] : *rc.controlled) {
            if (!p || !rc.rng->coin()) continue;
            for (Word& w : *p)
                w = Word{uint32_t(key.slot >= kControlSlot ? rc.rng->below(7) : rc.rng->below(f.order())), {}};
        }
    }
};

std::map<std::pair<int, ChannelKey>, Payload> index_shadow(const Transcript& t)
{
    std::map<std::pair<int, ChannelKey>, Payload> out;
    for (const auto& m : t.messages)
        if (m.sent) out[{m.round, m.key}] = *m.sent;
    return out;
}

// Replaces traffic on the chosen channels with a shadow run's traffic.
void replay(RoundControl& rc, const std::map<std::pair<int, ChannelKey>, Payload>& shadow,
            const std::vector<int>& channels)
{
    for (const auto& [rk, p] : shadow) {
        if (rk.first != rc.round) continue;
        if (std::find(channels.begin(), channels.end(), rk.second.channel) == channels.end()) continue;
        if (!rc.controls(rk.second.channel)) continue;
        (*rc.controlled)[rk.second] = p;
    }
}

class SplitSimulation : public Strategy {
public:
    explicit SplitSimulation(std::optional<uint32_t> decoy) : decoy_(decoy) {}

    std::optional<NodeSet> corrupt(const StrategySetup& s, Rng& rng) override
    {
        const auto fwd = s.network->forward();
        NodeSet sep;
        for (int c : fwd) {
            const auto& carriers = s.network->channels[c].carriers;
            if (carriers.empty()) throw StrategyInapplicable("a forward channel has no internal node");
            if (!std::binary_search(sep.begin(), sep.end(), carriers.front())) {
                sep.push_back(carriers.front());
                std::sort(sep.begin(), sep.end());
            }
        }
        if (sep.empty() || sep.size() > 2 * s.k)
            throw StrategyInapplicable("no A->B separator of size at most 2k");
        if (!s.shadow) throw StrategyInapplicable("split simulation needs a shadow run");
        const size_t half = (sep.size() + 1) / 2;
        const bool b = rng.coin();
        NodeSet w(b ? sep.begin() + half : sep.begin(), b ? sep.end() : sep.begin() + half);
        uint32_t decoy = decoy_ ? *decoy_ : uint32_t(rng.below(s.field->order()));
        shadow_ = index_shadow(s.shadow(s.field->elem(decoy), rng.next()));
        channels_ = fwd;
        return w;
    }

    void on_round(RoundControl& rc) override { replay(rc, shadow_, channels_); }

private:
    std::optional<uint32_t> decoy_;
    std::map<std::pair<int, ChannelKey>, Payload> shadow_;
    std::vector<int> channels_;
};

class MdsBoundary : public Strategy {
public:
    std::optional<NodeSet> corrupt(const StrategySetup& s, Rng& rng) override
    {
        const auto fwd = s.network->forward();
        const auto bwd = s.network->backward();
        if (fwd.size() < s.k || bwd.size() < s.u || s.u > s.k)
            throw StrategyInapplicable("mds boundary attack needs k forward and u backward paths");
        if (!s.shadow) throw StrategyInapplicable("mds boundary attack needs a shadow run");
        b_ = rng.coin();
        std::vector<int> order = fwd;
        for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        NodeSet w;
        const size_t take = b_ ? s.k - s.u : s.k;
        for (size_t i = 0; i < take; ++i) {
            w.push_back(s.network->channels[order[i]].carriers.front());
            channels_.push_back(order[i]);
        }
        if (b_) {
            for (size_t j = 0; j < s.u; ++j) {
                w.push_back(s.network->channels[bwd[j]].carriers.front());
                channels_.push_back(bwd[j]);
            }
        }
        const FieldElement decoy = s.field->elem(rng.below(s.field->order()));
        shadow_ = index_shadow(s.shadow(decoy, rng.next()));
        return w;
    }

    void on_round(RoundControl& rc) override
    {
        if (b_) replay(rc, shadow_, channels_);
    }

private:
    bool b_ = false;
    std::vector<int> channels_;
    std::map<std::pair<int, ChannelKey>, Payload> shadow_;
};

}  // namespace

AdversarySpec random_tamperer(NodeSet corrupted, uint64_t seed)
{
    AdversarySpec a;
    a.mode = AdversarySpec::Active;
    a.corrupted = std::move(corrupted);
    a.seed = seed;
    a.strategy = [] { return std::make_unique<RandomTamperer>(); };
    a.name = "random_tamperer";
    return a;
}

AdversarySpec split_simulation_attack(uint64_t seed, std::optional<uint32_t> decoy)
{
    AdversarySpec a;
    a.mode = AdversarySpec::Active;
    a.seed = seed;
    a.strategy = [decoy] { return std::make_unique<SplitSimulation>(decoy); };
    a.name = "split_simulation";
    return a;
}

AdversarySpec mds_boundary_attack(uint64_t seed)
{
    AdversarySpec a;
    a.mode = AdversarySpec::Active;
    a.seed = seed;
    a.strategy = [] { return std::make_unique<MdsBoundary>(); };
    a.name = "mds_boundary";
    return a;
}

// ---- execution ----

namespace {

Outcome run_session(const ProtocolBody& body, const Network& net, size_t k, size_t u, const AdversarySpec& adv,
                    const FieldElement& message, Coins& coins, uint64_t channel_seed, int stop_after)
{
    StrategySetup setup;
    setup.u = u;
    setup.shadow = [&body, &net, k, u, &coins](const FieldElement& m, uint64_t seed) {
        Coins shadow_coins(coins.field(), seed);
        return execute_with(body, net, k, u, no_adversary(), m, shadow_coins, derive_seed(seed, 1)).transcript;
    };
    Session s(message.spec(), net, k, coins, adv, channel_seed, setup);
    s.stop_after(stop_after);
    Outcome out;
    try {
        out.delivered = body(s, message);
    } catch (const RoundLimit&) {
    }
    out.rounds = s.round();
    out.transcript = s.transcript();
    out.view = s.view();
    return out;
}

}  // namespace

Outcome execute_with(const ProtocolBody& body, const Network& net, size_t k, size_t u,
                     const AdversarySpec& adv, const FieldElement& message, Coins& coins,
                     uint64_t channel_seed)
{
    return run_session(body, net, k, u, adv, message, coins, channel_seed, 0);
}

Outcome execute(const ProtocolBody& body, const Network& net, size_t k, size_t u, const AdversarySpec& adv,
                const FieldElement& message, const Seeds& seeds)
{
    Coins coins(message.spec(), seeds.honest);
    return execute_with(body, net, k, u, adv, message, coins, seeds.channel);
}

std::vector<ViewCoordinate> flatten(const AdversaryView& v)
{
    std::vector<ViewCoordinate> out;
    for (const auto& m : v.messages)
        for (size_t i = 0; i < m.payload.size(); ++i)
            out.push_back({m.round, m.key, i, m.payload[i].v, m.payload[i].t});
    return out;
}

// ---- privacy measurement ----

namespace {

constexpr uint32_t kMissing = 0xFFFFFFFFu;

struct ViewRunner {
    const PrivacyRequest& req;

    // Rounds past `stop_after` (when nonzero) are not simulated.
    std::vector<ViewCoordinate> run(const FieldElement& m, Coins& coins, int stop_after = 0) const
    {
        Outcome o = run_session(*req.body, *req.network, req.k, req.u, req.adversary, m, coins,
                                derive_seed(req.honest_seed, 0, 0x6368), stop_after);
        return flatten(o.view);
    }
};

bool same_shape(const std::vector<ViewCoordinate>& a, const std::vector<ViewCoordinate>& b)
{
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i].round != b[i].round || a[i].key != b[i].key || a[i].word != b[i].word) return false;
    return true;
}

// Shape check for a run cut short after `stop_after` rounds.
bool same_prefix(const std::vector<ViewCoordinate>& v, const std::vector<ViewCoordinate>& base, int stop_after)
{
    if (stop_after <= 0) return same_shape(v, base);
    size_t n = 0;
    while (n < base.size() && base[n].round <= stop_after) ++n;
    if (v.size() != n) return false;
    for (size_t i = 0; i < n; ++i)
        if (v[i].round != base[i].round || v[i].key != base[i].key || v[i].word != base[i].word) return false;
    return true;
}

int last_round(const std::vector<ViewCoordinate>& base, const std::vector<size_t>& coords)
{
    int r = 0;
    for (size_t c : coords) r = std::max(r, base[c].round);
    return r;
}

using Histogram = std::map<std::vector<uint32_t>, uint64_t>;

std::vector<uint32_t> project(const std::vector<ViewCoordinate>& view, const std::vector<size_t>& coords)
{
    std::vector<uint32_t> out;
    out.reserve(coords.size());
    for (size_t c : coords) out.push_back(c < view.size() ? view[c].value : kMissing);
    return out;
}

double distance(const Histogram& h0, uint64_t n0, const Histogram& h1, uint64_t n1)
{
    double d = 0;
    std::set<std::vector<uint32_t>> keys;
    for (const auto& [k, c] : h0) keys.insert(k);
    for (const auto& [k, c] : h1) keys.insert(k);
    for (const auto& k : keys) {
        auto a = h0.find(k), b = h1.find(k);
        double p0 = a == h0.end() ? 0 : double(a->second) / double(n0);
        double p1 = b == h1.end() ? 0 : double(b->second) / double(n1);
        d += std::abs(p0 - p1);
    }
    return d;
}

bool disjoint(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b)
{
    std::vector<uint32_t> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    return both.empty();
}

uint64_t space_size(uint64_t q, size_t coins, uint64_t cap)
{
    uint64_t s = 1;
    for (size_t i = 0; i < coins; ++i) {
        if (s > cap / q) return cap + 1;
        s *= q;
    }
    return s;
}

std::vector<uint32_t> coin_set(const std::vector<ViewCoordinate>& a, const std::vector<ViewCoordinate>& b,
                               const std::vector<size_t>& coords)
{
    std::set<uint32_t> ids;
    for (size_t c : coords) {
        if (c < a.size())
            for (uint32_t id : a[c].taint.ids()) ids.insert(id);
        if (c < b.size())
            for (uint32_t id : b[c].taint.ids()) ids.insert(id);
    }
    return {ids.begin(), ids.end()};
}

// Enumerates all assignments of `coins`, calling visit(view0, view1). Runs
// stop after round `stop_after` when it is nonzero.
template <class Visit>
bool enumerate(const ViewRunner& r, const std::vector<uint32_t>& coins, const std::vector<ViewCoordinate>& base,
               int stop_after, Visit&& visit)
{
    const PrivacyRequest& req = r.req;
    const uint64_t q = req.field->order();
    const uint64_t total = space_size(q, coins.size(), ~uint64_t(0) / 2);
    std::vector<uint32_t> digits(coins.size(), 0);
    bool stable = true;
    for (uint64_t n = 0; n < total; ++n) {
        uint64_t x = n;
        for (size_t i = 0; i < coins.size(); ++i) {
            digits[i] = uint32_t(x % q);
            x /= q;
        }
        std::vector<ViewCoordinate> v[2];
        for (int msg = 0; msg < 2; ++msg) {
            Coins c(*req.field, req.honest_seed);
            for (size_t i = 0; i < coins.size(); ++i) c.force(coins[i], digits[i]);
            v[msg] = r.run(msg ? req.m1 : req.m0, c, stop_after);
            if (!same_prefix(v[msg], base, stop_after)) stable = false;
        }
        visit(v[0], v[1]);
    }
    return stable;
}

}  // namespace

ViewDistanceReport view_distance(const PrivacyRequest& req)
{
    if (!req.body || !req.network || !req.field) throw ParamError("incomplete privacy request");
    ViewRunner runner{req};
    ViewDistanceReport rep;

    Coins c0(*req.field, req.honest_seed), c1(*req.field, req.honest_seed);
    c0.set_tracking(true);
    c1.set_tracking(true);
    const auto base0 = runner.run(req.m0, c0);
    const auto base1 = runner.run(req.m1, c1);
    rep.coordinates = base0.size();
    if (!same_shape(base0, base1)) {
        // The message changes which messages the adversary sees at all.
        rep.structure_stable = false;
        rep.exact = true;
        rep.distance = 2.0;
        return rep;
    }

    const size_t n = base0.size();
    std::vector<std::vector<size_t>> marginals;
    for (size_t i = 0; i < n; ++i) marginals.push_back({i});
    const size_t reach = n * (n - 1) / 2 <= 4000 ? n : 8;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n && j <= i + reach; ++j) marginals.push_back({i, j});

    const uint64_t q = req.field->order();
    const uint64_t store_cap = std::min<uint64_t>(req.enumeration_limit, req.window_limit);

    // Widest prefix window whose coin space fits; its enumeration is kept
    // and reused for every marginal whose coins it covers.
    std::vector<size_t> window;
    std::vector<uint32_t> window_coins;
    if (!req.force_estimate) {
        for (size_t i = 0; i < n; ++i) {
            auto trial = window;
            trial.push_back(i);
            auto coins = coin_set(base0, base1, trial);
            if (space_size(q, coins.size(), store_cap) > store_cap) break;
            window = std::move(trial);
            window_coins = std::move(coins);
        }
        if (window.size() > 2) marginals.push_back(window);
    }
    std::vector<std::vector<uint32_t>> stored[2];
    if (!window.empty()) {
        const bool kept = enumerate(runner, window_coins, base0, last_round(base0, window),
                                    [&](const auto& v0, const auto& v1) {
            stored[0].push_back(project(v0, window));
            stored[1].push_back(project(v1, window));
        });
        if (!kept) {
            // Some coin values change the run's shape; the base run's coin
            // sets do not describe those runs, so nothing here is exact.
            ++rep.fallbacks;
            window.clear();
            window_coins.clear();
            stored[0].clear();
            stored[1].clear();
        }
    }
    auto window_pos = [&](size_t coord) -> std::optional<size_t> {
        auto it = std::find(window.begin(), window.end(), coord);
        if (it == window.end()) return std::nullopt;
        return size_t(it - window.begin());
    };

    std::vector<size_t> estimate;  // marginals left for Monte Carlo
    // Marginals enumerated directly, grouped by the coins they depend on so
    // each coin space is walked once.
    std::map<std::vector<uint32_t>, std::vector<size_t>> groups;
    // Pairs over disjoint coins: the two words are independent for a fixed
    // message, so the joint law is the product of the singleton laws.
    std::vector<size_t> products;
    std::vector<Histogram> h0(marginals.size()), h1(marginals.size());
    std::vector<uint64_t> totals(marginals.size(), 0);
    std::vector<bool> done(marginals.size(), false);
    for (size_t mi = 0; mi < marginals.size(); ++mi) {
        const auto& m = marginals[mi];
        if (req.force_estimate) {
            estimate.push_back(mi);
            continue;
        }
        auto coins = coin_set(base0, base1, m);
        bool covered = !window.empty() &&
                       std::includes(window_coins.begin(), window_coins.end(), coins.begin(), coins.end());
        std::vector<size_t> pos;
        if (covered)
            for (size_t c : m) {
                auto p = window_pos(c);
                if (!p) {
                    covered = false;
                    break;
                }
                pos.push_back(*p);
            }
        if (covered) {
            for (size_t s = 0; s < stored[0].size(); ++s) {
                std::vector<uint32_t> k0, k1;
                for (size_t p : pos) {
                    k0.push_back(stored[0][s][p]);
                    k1.push_back(stored[1][s][p]);
                }
                h0[mi][k0]++;
                h1[mi][k1]++;
            }
            totals[mi] = stored[0].size();
            done[mi] = true;
        } else if (m.size() == 2 && disjoint(coin_set(base0, base1, {m[0]}), coin_set(base0, base1, {m[1]}))) {
            products.push_back(mi);
        } else if (space_size(q, coins.size(), req.enumeration_limit) <= req.enumeration_limit) {
            groups[coins].push_back(mi);
        } else {
            estimate.push_back(mi);
        }
    }
    for (const auto& [coins, members] : groups) {
        int stop = 0;
        for (size_t mi : members) stop = std::max(stop, last_round(base0, marginals[mi]));
        const bool kept = enumerate(runner, coins, base0, stop, [&](const auto& v0, const auto& v1) {
            for (size_t mi : members) {
                h0[mi][project(v0, marginals[mi])]++;
                h1[mi][project(v1, marginals[mi])]++;
                ++totals[mi];
            }
        });
        if (!kept) {
            ++rep.fallbacks;
            estimate.insert(estimate.end(), members.begin(), members.end());
            continue;
        }
        for (size_t mi : members) done[mi] = true;
    }
    for (size_t mi : products) {
        const size_t a = marginals[mi][0], b = marginals[mi][1];
        if (!done[a] || !done[b]) {
            estimate.push_back(mi);
            continue;
        }
        auto product = [&](const Histogram& x, const Histogram& y) {
            Histogram out;
            for (const auto& [kx, cx] : x)
                for (const auto& [ky, cy] : y) out[{kx[0], ky[0]}] += cx * cy;
            return out;
        };
        h0[mi] = product(h0[a], h0[b]);
        h1[mi] = product(h1[a], h1[b]);
        totals[mi] = totals[a] * totals[b];
        done[mi] = true;
    }
    for (size_t mi = 0; mi < marginals.size(); ++mi) {
        if (!done[mi]) continue;
        MarginalDistance md;
        md.coordinates = marginals[mi];
        md.exact = true;
        md.distance = distance(h0[mi], totals[mi], h1[mi], totals[mi]);
        md.support = std::max(h0[mi].size(), h1[mi].size());
        rep.marginals.push_back(md);
    }

    if (!estimate.empty()) {
        // Pairs only when their joint support is small enough to estimate.
        std::vector<size_t> chosen;
        for (size_t mi : estimate)
            if (marginals[mi].size() == 1 || (marginals[mi].size() == 2 && q * q <= 64)) chosen.push_back(mi);
        std::vector<Histogram> e0(chosen.size()), e1(chosen.size());
        for (size_t s = 0; s < req.budget; ++s) {
            const uint64_t seed = derive_seed(req.honest_seed, s, 0x6d63);
            Coins a(*req.field, seed), b(*req.field, seed ^ 0x5bd1e995);
            auto v0 = runner.run(req.m0, a);
            auto v1 = runner.run(req.m1, b);
            for (size_t i = 0; i < chosen.size(); ++i) {
                e0[i][project(v0, marginals[chosen[i]])]++;
                e1[i][project(v1, marginals[chosen[i]])]++;
            }
        }
        rep.samples = req.budget;
        for (size_t i = 0; i < chosen.size(); ++i) {
            MarginalDistance md;
            md.coordinates = marginals[chosen[i]];
            md.distance = distance(e0[i], req.budget, e1[i], req.budget);
            md.support = std::max(e0[i].size(), e1[i].size());
            rep.halfwidth = std::max(rep.halfwidth, std::sqrt(double(md.support) / double(req.budget)));
            rep.marginals.push_back(md);
        }
    }

    rep.exact = estimate.empty();
    for (const auto& md : rep.marginals) rep.distance = std::max(rep.distance, md.distance);
    return rep;
}

}  // namespace psmt
