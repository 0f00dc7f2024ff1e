#include "wtraffic/types.hpp"

namespace wtraffic {

std::string_view to_string(VehicleClass c) {
  switch (c) {
    case VehicleClass::Bike: return "bike";
    case VehicleClass::PassengerCar: return "car";
    case VehicleClass::Suv: return "suv";
    case VehicleClass::PickupTruck: return "pickup";
    case VehicleClass::LargeTruck: return "truck";
  }
  throw DomainError("unknown vehicle class");
}

VehicleClass parse_vehicle_class(std::string_view name) {
  for (auto c : kAllClasses) {
    if (to_string(c) == name) return c;
  }
  throw DomainError("unknown vehicle class '" + std::string(name) + "'");
}

VehicleClass class_from_ordinal(int i) {
  if (i < 0 || i >= kNumClasses) {
    throw DomainError("vehicle class ordinal out of range: " + std::to_string(i));
  }
  return static_cast<VehicleClass>(i);
}

std::string_view to_string(GroupingScheme s) {
  switch (s) {
    case GroupingScheme::Five: return "five";
    case GroupingScheme::Sml: return "sml";
    case GroupingScheme::CarTruck: return "car_truck";
  }
  throw DomainError("unknown grouping scheme");
}

GroupingScheme parse_grouping_scheme(std::string_view name) {
  if (name == "five") return GroupingScheme::Five;
  if (name == "sml") return GroupingScheme::Sml;
  if (name == "car_truck") return GroupingScheme::CarTruck;
  throw DomainError("unknown grouping scheme '" + std::string(name) + "'");
}

std::string_view group_prediction(VehicleClass c, GroupingScheme scheme) {
  switch (scheme) {
    case GroupingScheme::Five:
      return to_string(c);
    case GroupingScheme::Sml:
      switch (c) {
        case VehicleClass::Bike:
        case VehicleClass::PassengerCar: return "small";
        case VehicleClass::Suv:
        case VehicleClass::PickupTruck: return "medium";
        case VehicleClass::LargeTruck: return "large";
      }
      break;
    case GroupingScheme::CarTruck:
      return c == VehicleClass::LargeTruck ? "truck-like" : "car-like";
  }
  throw DomainError("unknown grouping scheme");
}

}  // namespace wtraffic
