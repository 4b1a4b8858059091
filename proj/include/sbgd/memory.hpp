#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace sbgd {

/// Live tensor-element accounting for one thread.
///
/// Counts are elements (doubles), not bytes, so they do not depend on the
/// allocator. Every tensor value and gradient buffer reports here on
/// allocation and release. Open `MemoryScope`s track the high-water mark seen
/// while they are active; nesting is allowed and an inner peak is always
/// folded into every enclosing scope.
class MemoryMeter {
 public:
  static MemoryMeter& local() {
    thread_local MemoryMeter meter;
    return meter;
  }

  void on_alloc(std::int64_t elements) {
    if (!enabled_ || elements == 0) return;
    current_ += elements;
    peak_ = std::max(peak_, current_);
    for (auto& s : scopes_) s = std::max(s, current_);
  }

  // Frees are honoured even while disabled so that a buffer allocated before
  // the meter was switched off still balances.
  void on_free(std::int64_t elements) { current_ -= elements; }

  std::int64_t current() const { return current_; }
  std::int64_t peak() const { return peak_; }

  bool enabled() const { return enabled_; }
  void set_enabled(bool on) { enabled_ = on; }

  /// Resets the global high-water mark to the current live count.
  void reset_peak() { peak_ = current_; }

  /// Largest peak recorded for each scope label since the last clear.
  const std::map<std::string, std::int64_t>& phase_peaks() const { return phases_; }
  void clear_phases() { phases_.clear(); }

 private:
  friend class MemoryScope;

  std::size_t push_scope() {
    scopes_.push_back(current_);
    return scopes_.size() - 1;
  }

  std::int64_t pop_scope(std::size_t index, const std::string& label) {
    const std::int64_t p = scopes_[index];
    scopes_.resize(index);
    auto& slot = phases_[label];
    slot = std::max(slot, p);
    return p;
  }

  std::int64_t scope_peak(std::size_t index) const { return scopes_[index]; }

  bool enabled_ = true;
  std::int64_t current_ = 0;
  std::int64_t peak_ = 0;
  std::vector<std::int64_t> scopes_;
  std::map<std::string, std::int64_t> phases_;
};

struct MemorySnapshot {
  std::string label;
  std::int64_t peak = 0;     // highest live element count inside the scope
  std::int64_t at_entry = 0; // live elements when the scope opened
};

/// RAII high-water scope. Scopes must be closed in LIFO order on one thread.
class MemoryScope {
 public:
  explicit MemoryScope(std::string label)
      : meter_(MemoryMeter::local()), label_(std::move(label)),
        entry_(meter_.current()), index_(meter_.push_scope()) {}

  MemoryScope(const MemoryScope&) = delete;
  MemoryScope& operator=(const MemoryScope&) = delete;

  ~MemoryScope() {
    if (open_) meter_.pop_scope(index_, label_);
  }

  std::int64_t peak() const { return open_ ? meter_.scope_peak(index_) : closed_peak_; }

  MemorySnapshot snapshot() const { return {label_, peak(), entry_}; }

  /// Closes the scope early and returns its final snapshot.
  MemorySnapshot close() {
    if (open_) {
      closed_peak_ = meter_.pop_scope(index_, label_);
      open_ = false;
    }
    return {label_, closed_peak_, entry_};
  }

 private:
  MemoryMeter& meter_;
  std::string label_;
  std::int64_t entry_;
  std::size_t index_;
  bool open_ = true;
  std::int64_t closed_peak_ = 0;
};

/// Owning array of doubles that reports its size to the thread's meter.
class Buffer {
 public:
  Buffer() = default;
  explicit Buffer(std::size_t n, double fill = 0.0) : data_(n, fill) { track(); }
  explicit Buffer(std::vector<double> values) : data_(std::move(values)) { track(); }

  Buffer(const Buffer& other) : data_(other.data_) { track(); }
  Buffer(Buffer&& other) noexcept
      : data_(std::move(other.data_)), tracked_(std::exchange(other.tracked_, 0)) {
    other.data_.clear();
  }
  Buffer& operator=(const Buffer& other) {
    if (this != &other) {
      release();
      data_ = other.data_;
      track();
    }
    return *this;
  }
  Buffer& operator=(Buffer&& other) noexcept {
    if (this != &other) {
      release();
      data_ = std::move(other.data_);
      other.data_.clear();
      tracked_ = std::exchange(other.tracked_, 0);
    }
    return *this;
  }
  ~Buffer() { release(); }

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  const std::vector<double>& values() const { return data_; }

  void reset() {
    release();
    data_.clear();
    data_.shrink_to_fit();
  }

 private:
  void track() {
    auto& meter = MemoryMeter::local();
    tracked_ = meter.enabled() ? static_cast<std::int64_t>(data_.size()) : 0;
    meter.on_alloc(tracked_);
  }
  void release() {
    if (tracked_ != 0) MemoryMeter::local().on_free(tracked_);
    tracked_ = 0;
  }

  std::vector<double> data_;
  std::int64_t tracked_ = 0;
};

}  // namespace sbgd
