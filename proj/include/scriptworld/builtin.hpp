#pragma once

// Bundled synthetic scenario used by the desk-scale tests and the CLI's
// --builtin flag. Six clusters over three ESDs; "go_doctor" and
// "go_pharmacy" each carry two alternative action sequences.

#include <string_view>

#include "scriptworld/corpus.hpp"
#include "scriptworld/hints.hpp"

namespace scriptworld {

inline constexpr std::string_view kBuiltinScenarioJson = R"json({
  "title": "Get Medicine",
  "neg_distance": 2,
  "esds": [
    { "id": "e1", "events": ["felt sick", "went to see the doctor", "got a prescription",
                             "went to the pharmacy", "bought the medicine", "took the medicine"] },
    { "id": "e2", "events": ["made a doctor appointment", "doctor wrote a prescription",
                             "purchased the medication", "took the pills"] },
    { "id": "e3", "events": ["had a cold", "walked to the drugstore", "bought cough syrup", "took a spoonful"] }
  ],
  "clusters": [
    { "id": "feel_sick", "label": "feel sick",
      "members": [ {"esd": "e1", "pos": 0}, {"esd": "e3", "pos": 0} ],
      "sequences": [
        [ ["feel unwell", "notice a headache", "wake up with a fever"],
          ["check your temperature", "use a thermometer"] ]
      ] },
    { "id": "go_doctor", "label": "go to doctor",
      "members": [ {"esd": "e1", "pos": 1}, {"esd": "e2", "pos": 0} ],
      "sequences": [
        [ ["call the clinic", "phone the doctor's office"],
          ["book an appointment", "schedule a visit with the doctor"],
          ["drive to the clinic", "travel to the doctor's office"] ],
        [ ["walk into an urgent care center", "go to a walk-in clinic"],
          ["wait in the waiting room", "sit in the lobby until called"] ]
      ] },
    { "id": "get_prescription", "label": "get prescription",
      "members": [ {"esd": "e1", "pos": 2}, {"esd": "e2", "pos": 1} ],
      "sequences": [
        [ ["describe your symptoms", "tell the doctor how you feel"],
          ["get examined by the doctor", "let the doctor listen to your chest"],
          ["receive a prescription", "take the prescription slip"] ]
      ] },
    { "id": "go_pharmacy", "label": "go to pharmacy",
      "members": [ {"esd": "e1", "pos": 3}, {"esd": "e3", "pos": 1} ],
      "sequences": [
        [ ["drive to the pharmacy", "head to the drugstore"] ],
        [ ["order the medicine online", "use the pharmacy app"],
          ["wait for the delivery", "open the package at the door"] ]
      ] },
    { "id": "buy_medicine", "label": "buy medicine",
      "members": [ {"esd": "e1", "pos": 4}, {"esd": "e2", "pos": 2}, {"esd": "e3", "pos": 2} ],
      "sequences": [
        [ ["hand over the prescription", "ask the pharmacist for the medicine"],
          ["pay for the medicine", "pay at the counter"] ]
      ] },
    { "id": "take_medicine", "label": "take medicine",
      "members": [ {"esd": "e1", "pos": 5}, {"esd": "e2", "pos": 3}, {"esd": "e3", "pos": 3} ],
      "sequences": [
        [ ["read the dosage instructions", "check the label on the box"],
          ["swallow the pill with water", "take the first tablet"] ]
      ] }
  ]
})json";

// One line per node the game can occupy. Each hint points at the next action
// without quoting it.
inline constexpr std::string_view kBuiltinHintsJsonl =
    R"({"node": "START", "hints": ["something feels wrong, notice if you are unwell or call a clinic", "maybe a fever, or phone for a doctor visit"]}
{"node": "feel_sick#entry", "hints": ["pay attention to a headache or a fever"]}
{"node": "feel_sick#0.0", "hints": ["a thermometer tells your temperature", "check if your temperature is high"]}
{"node": "feel_sick#0.1", "hints": ["see a doctor at the clinic, or order medicine from the pharmacy"]}
{"node": "feel_sick#exit", "hints": ["see a doctor at the clinic, or order medicine from the pharmacy"]}
{"node": "go_doctor#entry", "hints": ["phone the clinic or find a walk-in urgent care"]}
{"node": "go_doctor#0.0", "hints": ["ask for an appointment to visit the doctor"]}
{"node": "go_doctor#0.1", "hints": ["get in the car and travel to the clinic"]}
{"node": "go_doctor#0.2", "hints": ["explain your symptoms and how you feel to the doctor"]}
{"node": "go_doctor#1.0", "hints": ["find a seat in the waiting room"]}
{"node": "go_doctor#1.1", "hints": ["explain your symptoms and how you feel to the doctor"]}
{"node": "go_doctor#exit", "hints": ["explain your symptoms and how you feel to the doctor"]}
{"node": "get_prescription#entry", "hints": ["tell the doctor about your symptoms"]}
{"node": "get_prescription#0.0", "hints": ["the doctor will examine you and listen to your chest"]}
{"node": "get_prescription#0.1", "hints": ["the doctor writes a prescription slip for you"]}
{"node": "get_prescription#0.2", "hints": ["bring the prescription to the pharmacist, or order the medicine online"]}
{"node": "get_prescription#exit", "hints": ["bring the prescription to the pharmacist, or order the medicine online"]}
{"node": "go_pharmacy#entry", "hints": ["drive to a pharmacy or use an app to order online"]}
{"node": "go_pharmacy#0.0", "hints": ["give the prescription to the pharmacist"]}
{"node": "go_pharmacy#1.0", "hints": ["wait until the delivery package arrives at the door"]}
{"node": "go_pharmacy#1.1", "hints": ["give the prescription to the pharmacist"]}
{"node": "go_pharmacy#exit", "hints": ["give the prescription to the pharmacist"]}
{"node": "buy_medicine#entry", "hints": ["hand the pharmacist your prescription"]}
{"node": "buy_medicine#0.0", "hints": ["pay the pharmacist at the counter"]}
{"node": "buy_medicine#0.1", "hints": ["read the label and the dosage instructions"]}
{"node": "buy_medicine#exit", "hints": ["read the label and the dosage instructions"]}
{"node": "take_medicine#entry", "hints": ["check the dosage instructions on the box"]}
{"node": "take_medicine#0.0", "hints": ["swallow a tablet with a glass of water"]}
{"node": "take_medicine#0.1", "hints": ["rest and get well soon"]}
{"node": "take_medicine#exit", "hints": ["rest and get well soon"]}
)";

inline Scenario builtin_scenario() { return parse_scenario(kBuiltinScenarioJson); }

inline HintStore builtin_hints() { return parse_hints(kBuiltinHintsJsonl, builtin_scenario()); }

} // namespace scriptworld
