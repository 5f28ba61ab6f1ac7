#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace auvf::audit {

// Access audit for the black-box threat model. While an AttackerScope is
// active, instrumented accessors (victim parameters, raw interaction edges,
// item images outside the attacker-visible set) count as forbidden reads.
// Outside any scope the hooks are no-ops.

struct Counters {
  int64_t victim_param_reads = 0;
  int64_t raw_edge_reads = 0;
  int64_t forbidden_image_reads = 0;
  int64_t allowed_image_reads = 0;

  int64_t forbidden_total() const {
    return victim_param_reads + raw_edge_reads + forbidden_image_reads;
  }
};

bool active();
Counters& counters();
void reset();

void set_allowed_items(const std::vector<int>& items);

void note_victim_param_read();
void note_raw_edge_read();
void note_image_read(int item_id);

class AttackerScope {
public:
  AttackerScope();
  explicit AttackerScope(const std::vector<int>& allowed_items);
  ~AttackerScope();
  AttackerScope(const AttackerScope&) = delete;
  AttackerScope& operator=(const AttackerScope&) = delete;
};

}  // namespace auvf::audit
