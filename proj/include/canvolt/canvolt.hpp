#pragma once

#include "canvolt/attacks.hpp"
#include "canvolt/common.hpp"
#include "canvolt/config.hpp"
#include "canvolt/electrical.hpp"
#include "canvolt/engine.hpp"
#include "canvolt/irs.hpp"
#include "canvolt/link.hpp"
#include "canvolt/output.hpp"
#include "canvolt/params.hpp"
