#include "auvf/audit.hpp"

namespace auvf::audit {

namespace {
bool g_active = false;
Counters g_counters;
std::set<int> g_allowed_items;
}  // namespace

bool active() { return g_active; }
Counters& counters() { return g_counters; }

void reset() {
  g_counters = Counters{};
  g_allowed_items.clear();
}

void set_allowed_items(const std::vector<int>& items) {
  g_allowed_items = std::set<int>(items.begin(), items.end());
}

void note_victim_param_read() {
  if (g_active) ++g_counters.victim_param_reads;
}

void note_raw_edge_read() {
  if (g_active) ++g_counters.raw_edge_reads;
}

void note_image_read(int item_id) {
  if (!g_active) return;
  if (g_allowed_items.count(item_id))
    ++g_counters.allowed_image_reads;
  else
    ++g_counters.forbidden_image_reads;
}

AttackerScope::AttackerScope() { g_active = true; }

AttackerScope::AttackerScope(const std::vector<int>& allowed_items) {
  set_allowed_items(allowed_items);
  g_active = true;
}

AttackerScope::~AttackerScope() { g_active = false; }

}  // namespace auvf::audit
