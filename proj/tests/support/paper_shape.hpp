// A fixed 166-question horizon multiset with 17,475 total days (min 4,
// max 418, skewed like real question lifetimes). The greedy balancer splits
// it into 83/83 questions with day totals 8738/8737.
#pragma once

#include <array>

namespace crowdbelief::testing {

inline constexpr std::array<int, 166> kPaperShapeHorizons = {
    129, 106, 220, 183, 58,  248, 37,  90,  46,  36,  235, 99,  33,  237, 233, 333, 38,  78,
    31,  162, 26,  192, 55,  81,  81,  76,  64,  92,  182, 153, 118, 95,  36,  197, 90,  88,
    78,  56,  89,  104, 24,  8,   102, 127, 16,  60,  27,  39,  166, 47,  24,  67,  78,  179,
    12,  14,  137, 190, 24,  53,  38,  30,  10,  172, 87,  141, 58,  20,  68,  13,  42,  10,
    40,  57,  371, 202, 418, 16,  18,  37,  165, 199, 170, 55,  299, 23,  42,  150, 88,  33,
    286, 243, 16,  101, 32,  264, 69,  17,  180, 38,  14,  210, 100, 57,  26,  174, 36,  53,
    33,  277, 144, 222, 80,  13,  176, 45,  103, 51,  83,  14,  17,  72,  28,  123, 154, 23,
    184, 418, 108, 68,  198, 52,  90,  197, 61,  141, 86,  60,  37,  171, 53,  84,  114, 243,
    36,  74,  57,  30,  119, 174, 418, 41,  181, 41,  29,  197, 49,  12,  259, 168, 26,  235,
    168, 37,  99,  35};

inline constexpr int kPaperShapeTotalDays = 17475;

}  // namespace crowdbelief::testing
