#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pvp {

/// Invalid scene, collection or run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of an operation (e.g. interpolation parameter).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Corrupted or truncated dataset record.
class IntegrityError : public std::runtime_error {
 public:
  IntegrityError(const std::string& what, std::size_t record)
      : std::runtime_error(what + " (record " + std::to_string(record) + ")"), record_(record) {}
  std::size_t record() const { return record_; }

 private:
  std::size_t record_;
};

/// Non-finite loss or inputs during policy training.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::size_t batch)
      : std::runtime_error(what + " (batch " + std::to_string(batch) + ")"), batch_(batch) {}
  std::size_t batch() const { return batch_; }

 private:
  std::size_t batch_;
};

/// Grasp selection was asked to pick from an empty candidate list.
class NoGraspError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pvp
