#include "strait/pcie.h"

#include <algorithm>
#include <stdexcept>

namespace strait {

Millis PcieLink::EstimateUpstreamDelay(Timestamp now) const {
  return std::max(0.0, t_available_ - now);
}

PcieLink::Reservation PcieLink::Reserve(Timestamp now, Millis t_htod) {
  if (!(t_htod > 0)) {
    throw std::invalid_argument("t_htod must be positive");
  }
  const Timestamp start = std::max(now, t_available_);
  t_available_ = start + t_htod;
  Reservation r{next_id_++, start, t_available_};
  pending_.push_back(r);
  return r;
}

void PcieLink::Calibrate(ReservationId id, Timestamp actual_end) {
  auto it = std::find_if(pending_.begin(), pending_.end(),
                         [id](const Reservation& r) { return r.id == id; });
  if (it == pending_.end()) return;
  const double offset = actual_end - it->predicted_end;
  const bool most_recent = std::next(it) == pending_.end();
  for (auto later = std::next(it); later != pending_.end(); ++later) {
    later->predicted_start += offset;
    later->predicted_end += offset;
  }
  // FIFO: everything up to the completed transfer is done.
  pending_.erase(pending_.begin(), std::next(it));
  if (most_recent) {
    t_available_ = actual_end;
  } else {
    t_available_ += offset;
  }
}

}  // namespace strait
