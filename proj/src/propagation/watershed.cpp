#include <queue>
#include <stdexcept>

#include "dragdrop/propagation/watershed.hpp"

namespace dragdrop {

namespace {

struct Entry {
  float priority;
  std::uint64_t seq;
  std::uint32_t index;
  std::uint8_t label;
};

struct Later {
  bool operator()(const Entry& a, const Entry& b) const {
    if (a.priority != b.priority) return a.priority > b.priority;
    return a.seq > b.seq;
  }
};

}  // namespace

Grid<std::uint8_t> watershed(const Volume& gradient, const MarkerSet& markers, Connectivity conn) {
  if (markers.lesion.empty() && markers.background.empty()) throw std::invalid_argument("watershed: no markers");
  Grid<std::uint8_t> out = Grid<std::uint8_t>::like(gradient, basin::unassigned);

  auto seed = [&](const std::vector<Index3>& list, std::uint8_t label) {
    for (const Index3& v : list) {
      if (!out.contains(v)) throw std::invalid_argument("watershed: marker out of bounds");
      if (out(v) != basin::unassigned && out(v) != label) throw std::invalid_argument("watershed: marker lists overlap");
      out(v) = label;
    }
  };
  seed(markers.lesion, basin::lesion);
  seed(markers.background, basin::background);

  const auto& offs = neighbor_offsets(conn);
  std::priority_queue<Entry, std::vector<Entry>, Later> queue;
  std::uint64_t seq = 0;
  auto push_neighbours = [&](const Index3& v, std::uint8_t label) {
    for (const Index3& o : offs) {
      const Index3 q = v + o;
      if (!out.contains(q) || out(q) != basin::unassigned) continue;
      const auto i = out.index(q);
      queue.push(Entry{gradient[i], seq++, std::uint32_t(i), label});
    }
  };
  for (const Index3& v : markers.lesion) push_neighbours(v, basin::lesion);
  for (const Index3& v : markers.background) push_neighbours(v, basin::background);

  while (!queue.empty()) {
    const Entry e = queue.top();
    queue.pop();
    if (out[e.index] != basin::unassigned) continue;
    out[e.index] = e.label;
    push_neighbours(out.coord(e.index), e.label);
  }
  return out;
}

}  // namespace dragdrop
