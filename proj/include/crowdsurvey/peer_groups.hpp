#pragma once

#include <optional>
#include <span>
#include <vector>

#include "crowdsurvey/survey.hpp"

namespace crowdsurvey {

struct PeerGroups {
  std::vector<ParticipantId> lower;  // nearest outcomes at or below the target
  std::vector<ParticipantId> upper;  // nearest outcomes strictly above
  std::optional<double> lower_mean_outcome;
  std::optional<double> upper_mean_outcome;
};

/// Up to `group_size` participants on each side of the target's outcome.
/// Outcomes equal to the target's go to the lower group; equal candidates
/// are taken in registration order. Withdrawn participants and those
/// without an outcome are never members. Throws NoOutcome if the target has
/// none.
PeerGroups build_peer_groups(const Participant& target, std::span<const Participant> participants,
                             int group_size);

PeerGroups build_peer_groups(const Store& store, ParticipantId target);

/// Mean raw answer among group members who answered `qid`.
std::optional<double> group_question_profile(const Store& store,
                                             std::span<const ParticipantId> group, QuestionId qid);

}  // namespace crowdsurvey
