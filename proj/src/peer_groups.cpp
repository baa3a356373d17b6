#include "crowdsurvey/peer_groups.hpp"

#include <algorithm>

namespace crowdsurvey {
namespace {

struct Candidate {
  double outcome;
  Timestamp registered_at;
  ParticipantId id;
};

std::optional<double> mean_outcome(const std::vector<Candidate>& members) {
  if (members.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& m : members) sum += m.outcome;
  return sum / static_cast<double>(members.size());
}

}  // namespace

PeerGroups build_peer_groups(const Participant& target, std::span<const Participant> participants,
                             int group_size) {
  if (!target.outcome) {
    throw SurveyError(ErrorCode::NoOutcome,
                      "participant " + std::to_string(target.id.value) + " has no outcome");
  }
  const double own = *target.outcome;
  std::vector<Candidate> below;
  std::vector<Candidate> above;
  for (const auto& p : participants) {
    if (p.id == target.id || p.withdrawn || !p.outcome) continue;
    (*p.outcome <= own ? below : above).push_back({*p.outcome, p.registered_at, p.id});
  }

  const auto cap = static_cast<std::size_t>(std::max(group_size, 0));
  auto by_registration = [](const Candidate& x, const Candidate& y) {
    return std::tie(x.registered_at, x.id) < std::tie(y.registered_at, y.id);
  };
  std::sort(below.begin(), below.end(), [&](const Candidate& x, const Candidate& y) {
    if (x.outcome != y.outcome) return x.outcome > y.outcome;
    return by_registration(x, y);
  });
  std::sort(above.begin(), above.end(), [&](const Candidate& x, const Candidate& y) {
    if (x.outcome != y.outcome) return x.outcome < y.outcome;
    return by_registration(x, y);
  });
  if (below.size() > cap) below.resize(cap);
  if (above.size() > cap) above.resize(cap);

  PeerGroups groups;
  for (const auto& c : below) groups.lower.push_back(c.id);
  for (const auto& c : above) groups.upper.push_back(c.id);
  groups.lower_mean_outcome = mean_outcome(below);
  groups.upper_mean_outcome = mean_outcome(above);
  return groups;
}

PeerGroups build_peer_groups(const Store& store, ParticipantId target) {
  return build_peer_groups(store.participant(target), store.participants(),
                           store.config().peer_group_size);
}

std::optional<double> group_question_profile(const Store& store,
                                             std::span<const ParticipantId> group, QuestionId qid) {
  double sum = 0.0;
  std::size_t count = 0;
  for (auto pid : group) {
    if (const auto* r = store.response(pid, qid)) {
      sum += r->raw_value;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

}  // namespace crowdsurvey
