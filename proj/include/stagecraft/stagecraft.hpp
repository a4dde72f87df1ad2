#pragma once

#include "stagecraft/builtins.hpp"
#include "stagecraft/certificates.hpp"
#include "stagecraft/cmpfn.hpp"
#include "stagecraft/config.hpp"
#include "stagecraft/converse.hpp"
#include "stagecraft/error.hpp"
#include "stagecraft/io.hpp"
#include "stagecraft/kl.hpp"
#include "stagecraft/oracle.hpp"
#include "stagecraft/parallel.hpp"
#include "stagecraft/synthesis.hpp"
#include "stagecraft/system.hpp"
