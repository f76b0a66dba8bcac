#pragma once

#include <cstdint>
#include <deque>

#include "strait/types.h"

namespace strait {

using ReservationId = std::int64_t;

// Scheduler-side model of one GPU's upstream PCIe link. Transfers are served
// strictly in submission order, so the link is summarized by the time it next
// becomes free.
class PcieLink {
 public:
  struct Reservation {
    ReservationId id;
    Timestamp predicted_start;
    Timestamp predicted_end;
  };

  PcieLink() = default;
  explicit PcieLink(Timestamp t_available) : t_available_(t_available) {}

  Timestamp t_available() const { return t_available_; }

  // max(0, t_available - now).
  Millis EstimateUpstreamDelay(Timestamp now) const;

  // t_available <- max(now, t_available) + t_htod. Throws
  // std::invalid_argument when t_htod <= 0.
  Reservation Reserve(Timestamp now, Millis t_htod);

  // Folds a measured transfer end back into the link state. If the transfer
  // was the most recent reservation the link becomes free at `actual_end`;
  // otherwise the signed error shifts t_available and every later pending
  // reservation. Unknown ids are ignored.
  void Calibrate(ReservationId id, Timestamp actual_end);

  const std::deque<Reservation>& pending() const { return pending_; }

 private:
  Timestamp t_available_ = 0;
  ReservationId next_id_ = 0;
  std::deque<Reservation> pending_;
};

}  // namespace strait
