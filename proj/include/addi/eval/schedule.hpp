// addi/eval/schedule.hpp

// Copyright 2026  addilab authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Plateau schedule driven by validation accuracy. After `patience` epochs
// without a strict improvement the caller restores the best checkpoint and the
// learning rate is multiplied by `factor`; training stops once it drops below
// `min_lr`.

#pragma once

#include <limits>

#include "addi/common/error.hpp"

namespace addi::eval {

enum class ScheduleAction { kContinue, kRestoreBest, kStop };

inline const char* ScheduleActionName(ScheduleAction a) {
  switch (a) {
    case ScheduleAction::kContinue: return "continue";
    case ScheduleAction::kRestoreBest: return "restore_best";
    case ScheduleAction::kStop: return "stop";
  }
  return "?";
}

struct ScheduleOptions {
  double initial_lr = 1e-4;
  int patience = 5;
  double factor = 0.5;
  double min_lr = 1e-5;
};

struct ScheduleDecision {
  double lr;
  ScheduleAction action;
  bool improved;
};

class LrSchedule {
 public:
  explicit LrSchedule(const ScheduleOptions& opts = {}) : opts_(opts), lr_(opts.initial_lr) {
    Require(opts.initial_lr > 0.0, ErrorKind::kConfig, "initial learning rate must be positive");
    Require(opts.patience >= 1, ErrorKind::kConfig, "schedule patience must be at least 1");
    Require(opts.factor > 0.0 && opts.factor < 1.0, ErrorKind::kConfig,
            "schedule factor must lie in (0, 1)");
    Require(opts.min_lr >= 0.0, ErrorKind::kConfig, "minimum learning rate must be >= 0");
  }

  double lr() const { return lr_; }
  double best() const { return best_; }
  int stagnant() const { return stagnant_; }

  // Feeds one epoch's validation accuracy.
  ScheduleDecision Step(double val_accuracy) {
    if (val_accuracy > best_) {
      best_ = val_accuracy;
      stagnant_ = 0;
      return {lr_, ScheduleAction::kContinue, true};
    }
    if (++stagnant_ < opts_.patience) return {lr_, ScheduleAction::kContinue, false};
    stagnant_ = 0;
    lr_ *= opts_.factor;
    if (lr_ < opts_.min_lr) return {lr_, ScheduleAction::kStop, false};
    return {lr_, ScheduleAction::kRestoreBest, false};
  }

 private:
  ScheduleOptions opts_;
  double lr_;
  double best_ = -std::numeric_limits<double>::infinity();
  int stagnant_ = 0;
};

}  // namespace addi::eval
