#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace boundary {

// In-band request markers. The wire protocol has no metadata slot, so the
// harness embeds "[item:{id}]" as the first line of the user text and the
// mock server parses it back out. Real endpoints are sent the same text
// unless marker embedding is disabled in the prompt template.
inline std::string item_marker(const std::string& item_id) { return "[item:" + item_id + "]"; }

std::optional<std::string> extract_item_marker(std::string_view text);

// Phrases the mock server keys on to route judge-style requests. Both appear
// verbatim in the corresponding prompt templates.
inline constexpr const char* kJudgeRouteMarker = "Reply with exactly YES or NO";
inline constexpr const char* kModalityRouteMarker = "naming the imaging modality";

// Sentinels wrapping the raw model response inside the correctness-judge
// prompt, so the mock can locate the section it grades.
inline constexpr const char* kJudgeResponseOpen = "<<<";
inline constexpr const char* kJudgeResponseClose = ">>>";

}  // namespace boundary
