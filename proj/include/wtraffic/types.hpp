#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wtraffic {

/// Number of subcarriers reported per antenna pair.
inline constexpr std::size_t kSubcarriers = 30;

enum class VehicleClass : int {
  Bike = 0,
  PassengerCar = 1,
  Suv = 2,
  PickupTruck = 3,
  LargeTruck = 4,
};

inline constexpr int kNumClasses = 5;

inline constexpr std::array<VehicleClass, kNumClasses> kAllClasses = {
    VehicleClass::Bike, VehicleClass::PassengerCar, VehicleClass::Suv,
    VehicleClass::PickupTruck, VehicleClass::LargeTruck};

/// Wire name used in label/event files: "bike", "car", "suv", "pickup", "truck".
std::string_view to_string(VehicleClass c);
VehicleClass parse_vehicle_class(std::string_view name);

inline constexpr int ordinal(VehicleClass c) { return static_cast<int>(c); }
VehicleClass class_from_ordinal(int i);

/// Coarser label sets used when scoring predictions.
enum class GroupingScheme { Five, Sml, CarTruck };

std::string_view to_string(GroupingScheme s);
GroupingScheme parse_grouping_scheme(std::string_view name);

/// five -> class name; sml -> small/medium/large; car_truck -> car-like/truck-like.
std::string_view group_prediction(VehicleClass c, GroupingScheme scheme);

// Error hierarchy. Every failure the library reports derives from Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};
class LengthError : public Error {
 public:
  using Error::Error;
};
class ShapeError : public Error {
 public:
  using Error::Error;
};
class DomainError : public Error {
 public:
  using Error::Error;
};
class IndexError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};
class InvariantError : public Error {
 public:
  using Error::Error;
};
class ScenarioError : public Error {
 public:
  using Error::Error;
};
class DataError : public Error {
 public:
  using Error::Error;
};
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, const std::string& what)
      : Error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace wtraffic
