#pragma once

#include "scriptworld/agents.hpp"
#include "scriptworld/builtin.hpp"
#include "scriptworld/corpus.hpp"
#include "scriptworld/engine.hpp"
#include "scriptworld/errors.hpp"
#include "scriptworld/features.hpp"
#include "scriptworld/graph.hpp"
#include "scriptworld/hints.hpp"
#include "scriptworld/nn.hpp"
#include "scriptworld/protocol.hpp"
#include "scriptworld/reference.hpp"
#include "scriptworld/rng.hpp"
#include "scriptworld/text.hpp"
