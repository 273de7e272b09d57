#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "psmt/field.hpp"
#include "psmt/topology.hpp"

namespace psmt {

using Payload = std::vector<Word>;

bool same_values(const Payload& a, const Payload& b);

// Control words carried in slots >= kControlSlot. Anything else read from a
// control slot decodes as Symbol::None.
enum class Symbol : uint32_t { None = 0, Ok = 1, Stop = 2, Continue = 3, Faulty = 4, MaybeOk = 5, Help = 6 };
constexpr int kControlSlot = 100;

Payload pack(std::initializer_list<FieldElement> xs);
Payload pack(const std::vector<FieldElement>& xs);
Payload pack_symbol(Symbol s);

// Reads field elements off a payload. Missing or out-of-range words read as
// zero and set malformed(), which is the default-substitution rule.
class Reader {
public:
    Reader(const FieldSpec& f, const std::optional<Payload>& p);

    FieldElement elem();
    std::vector<FieldElement> elems(size_t n);
    Symbol symbol();
    size_t remaining() const;
    bool present() const { return present_; }
    bool malformed() const { return malformed_; }

private:
    const FieldSpec* f_;
    Payload words_;
    size_t pos_ = 0;
    bool present_ = false;
    bool malformed_ = false;
};

enum class Direction { AB, BA, Link };

// One wire. A path is a channel whose carriers are its internal nodes; a
// hyperpath additionally lists the receivers of its hyperedges as observers.
struct Channel {
    Direction dir = Direction::AB;
    int index = 0;         // path number within its direction
    std::string label;
    NodeSet carriers;      // corrupting one of these controls the channel
    NodeSet observers;     // corrupting one of these only reads it
    bool ideal = false;    // reliable and public; cannot be modified
    double failure = 0.0;  // loss probability of an ideal channel
};

struct Network {
    std::vector<std::string> node_names;  // internal nodes the adversary may corrupt
    std::vector<Channel> channels;

    std::vector<int> forward() const;   // indices of A->B channels in order
    std::vector<int> backward() const;  // B->A
    size_t node_count() const { return node_names.size(); }
};

// Directed paths as atomic wires; each path owns one fresh internal node
// unless it is explicitly shared.
Network path_network(size_t forward, size_t backward);
// The last `shared` backward paths reuse the internal node of the last
// `shared` forward paths.
Network shared_path_network(size_t forward, size_t backward, size_t shared);
Network channels_network(size_t n);  // n A->B channels, nothing else

struct ChannelKey {
    int channel = 0;
    int slot = 0;
    auto operator<=>(const ChannelKey&) const = default;
};

struct RoundMessage {
    int round = 0;
    ChannelKey key;
    std::optional<Payload> sent;       // honest input, nullopt for injections
    std::optional<Payload> delivered;  // nullopt when dropped
};

struct Transcript {
    std::vector<RoundMessage> messages;
    int rounds = 0;

    bool operator==(const Transcript& o) const;
};

struct ObservedMessage {
    int round = 0;
    ChannelKey key;
    Payload payload;
};

struct AdversaryView {
    NodeSet corrupted;
    std::vector<ObservedMessage> messages;
};

// Projection of a transcript onto what `corrupted` sees: honest inputs on
// every channel it carries or observes, plus everything on ideal channels.
AdversaryView project_view(const Transcript& t, const Network& net, const NodeSet& corrupted);

// Honest randomness. In tracking mode every draw carries Taint::coin(i).
// Forced draws override values; unforced draw i is a pure function of
// (seed, i) so forcing some coins leaves the others unchanged.
class Coins {
public:
    Coins(const FieldSpec& f, uint64_t seed) : f_(&f), seed_(seed) {}

    FieldElement draw();
    uint64_t below(uint64_t n);  // non-field honest choice, untracked
    void set_tracking(bool on) { tracking_ = on; }
    void force(uint32_t index, uint32_t value) { forced_[index] = value; }
    void clear_forced() { forced_.clear(); }
    uint32_t count() const { return next_; }
    const FieldSpec& field() const { return *f_; }

private:
    const FieldSpec* f_;
    uint64_t seed_;
    uint32_t next_ = 0;
    uint64_t extra_ = 0;
    bool tracking_ = false;
    std::map<uint32_t, uint32_t> forced_;
};

class Session;

struct RoundControl {
    int round = 0;
    const Session* session = nullptr;
    const AdversaryView* view = nullptr;  // cumulative, includes this round
    // Every message on a controlled channel this round; set an entry to
    // nullopt to drop it or add entries to inject.
    std::map<ChannelKey, std::optional<Payload>>* controlled = nullptr;
    Rng* rng = nullptr;

    bool controls(int channel) const;
};

// Transcript of an adversary-free run for a chosen message, used by
// simulation attacks. Seeded from the adversary's coins.
using ShadowRun = std::function<Transcript(const FieldElement& message, uint64_t seed)>;

struct StrategySetup {
    const Network* network = nullptr;
    const FieldSpec* field = nullptr;
    size_t k = 0;
    size_t u = 0;
    ShadowRun shadow;
};

class Strategy {
public:
    virtual ~Strategy() = default;
    // Called once before round 1. May replace the corruption set.
    virtual std::optional<NodeSet> corrupt(const StrategySetup&, Rng&) { return std::nullopt; }
    virtual void on_round(RoundControl&) {}
};

struct AdversarySpec {
    enum Mode { Passive, Active } mode = Passive;
    NodeSet corrupted;
    std::function<std::unique_ptr<Strategy>()> strategy;  // may be empty
    uint64_t seed = 0;                                    // the adversary coins r
    std::string name = "none";
};

AdversarySpec no_adversary();
AdversarySpec passive_observer(NodeSet corrupted, uint64_t seed = 0);
AdversarySpec random_tamperer(NodeSet corrupted, uint64_t seed);
// Coin-chosen half of a size-2k separator of the A->B channels replays a
// shadow run for the decoy (uniform when absent).
AdversarySpec split_simulation_attack(uint64_t seed, std::optional<uint32_t> decoy = std::nullopt);
// b = 0: passive on k forward paths. b = 1: k-u forward paths replay a run
// for a uniform decoy and the u backward paths replay that run's feedback.
AdversarySpec mds_boundary_attack(uint64_t seed);

class Session {
public:
    Session(const FieldSpec& f, const Network& net, size_t k, Coins& coins, const AdversarySpec& adv,
            uint64_t channel_seed, StrategySetup setup = {});
    ~Session();

    const FieldSpec& field() const { return *f_; }
    const Network& network() const { return *net_; }
    size_t k() const { return k_; }
    Coins& coins() { return *coins_; }
    int round() const { return round_; }
    const NodeSet& corrupted() const { return corrupted_; }
    bool controlled(int channel) const;
    bool observed(int channel) const;

    void send(int channel, int slot, Payload p);
    void send(int channel, Payload p) { send(channel, 0, std::move(p)); }

    // Abandons the run at the next exchange after `rounds` rounds (0: never).
    void stop_after(int rounds) { stop_after_ = rounds; }

    // Ends the round. Returns what arrives at the receivers.
    std::map<ChannelKey, Payload> exchange();

    const Transcript& transcript() const { return transcript_; }
    const AdversaryView& view() const { return view_; }

private:
    const FieldSpec* f_;
    const Network* net_;
    size_t k_;
    Coins* coins_;
    AdversarySpec::Mode mode_;
    NodeSet corrupted_;
    std::unique_ptr<Strategy> strategy_;
    Rng adv_rng_;
    Rng channel_rng_;
    int round_ = 0;
    int stop_after_ = 0;
    Taint known_;  // coins behind everything the adversary has observed
    std::map<ChannelKey, Payload> pending_;
    Transcript transcript_;
    AdversaryView view_;
};

using Inbox = std::map<ChannelKey, Payload>;

std::optional<Payload> lookup(const Inbox& in, int channel, int slot = 0);
Reader read(const Session& s, const Inbox& in, int channel, int slot = 0);

// Most frequent payload on the given channels (absent ones ignored); ties go
// to the value seen on the earliest channel. No precondition.
std::optional<Payload> majority_vote(const Inbox& in, const std::vector<int>& channels, int slot = 0);

// One round: the payload goes out on every channel and the receiver takes
// the majority. Needs at least 2k+1 channels.
Payload reliable_broadcast(Session& s, const std::vector<int>& channels, const Payload& p, int slot = 0);
void require_reliable(const Session& s, const std::vector<int>& channels);

// Stand-in for an external reliable multicast with failure probability
// delta_r. Returns nullopt on failure, never a modified payload.
std::optional<Payload> idealized_reliable_channel(const Payload& p, double delta_r, Rng& rng);

struct Outcome {
    std::optional<FieldElement> delivered;  // nullopt is the failure marker
    int rounds = 0;
    Transcript transcript;
    AdversaryView view;

    bool failed() const { return !delivered.has_value(); }
};

// The two parties' logic, written as straight-line code over a Session.
// Returns B's output or nullopt when B halts without one.
using ProtocolBody = std::function<std::optional<FieldElement>(Session&, const FieldElement& message)>;

struct Seeds {
    uint64_t honest = 0;
    uint64_t channel = 0;
};

// Runs `body` once. Corruption sets larger than k or naming unknown nodes
// raise PreconditionError.
Outcome execute(const ProtocolBody& body, const Network& net, size_t k, size_t u,
                const AdversarySpec& adv, const FieldElement& message, const Seeds& seeds);

// Same, with an externally owned coin source (used for exact enumeration).
Outcome execute_with(const ProtocolBody& body, const Network& net, size_t k, size_t u,
                     const AdversarySpec& adv, const FieldElement& message, Coins& coins,
                     uint64_t channel_seed);

struct MarginalDistance {
    std::vector<size_t> coordinates;  // indices into the flattened view
    double distance = 0.0;            // sum over views of |p0 - p1|, in [0, 2]
    bool exact = false;
    size_t support = 0;
};

struct ViewDistanceReport {
    bool exact = false;     // every reported marginal was enumerated
    double distance = 0.0;  // max over marginals
    double halfwidth = 0.0; // Monte Carlo noise scale, 0 when exact
    size_t samples = 0;
    size_t coordinates = 0; // length of the flattened view
    bool structure_stable = true;  // false: the message alone changes the view's shape
    size_t fallbacks = 0;          // enumerations that changed shape and were estimated instead
    std::vector<MarginalDistance> marginals;
};

struct PrivacyRequest {
    const ProtocolBody* body = nullptr;
    const Network* network = nullptr;
    const FieldSpec* field = nullptr;
    size_t k = 0;
    size_t u = 0;
    AdversarySpec adversary;  // its seed is the fixed r
    FieldElement m0, m1;
    uint64_t honest_seed = 0;
    size_t budget = 100'000;             // Monte Carlo samples per message
    uint64_t enumeration_limit = 100'000;
    uint64_t window_limit = 20'000;  // joint prefix window kept in memory
    bool force_estimate = false;
};

// Exact: every singleton and pair marginal (and the widest prefix window
// that fits) is enumerated over the honest coins it depends on. Marginals
// whose coin space exceeds the limit fall back to Monte Carlo.
ViewDistanceReport view_distance(const PrivacyRequest& req);

// Flattened view: one entry per word, in transcript order.
struct ViewCoordinate {
    int round = 0;
    ChannelKey key;
    size_t word = 0;
    uint32_t value = 0;
    Taint taint;
};
std::vector<ViewCoordinate> flatten(const AdversaryView& v);

}  // namespace psmt
