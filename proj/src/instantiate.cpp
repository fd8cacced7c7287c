#include "arcnet/cells.hpp"
#include "arcnet/graph.hpp"
#include "arcnet/model.hpp"
#include "arcnet/optim.hpp"
#include "arcnet/params.hpp"
#include "arcnet/shift_net.hpp"

namespace arcnet {

template class Graph<float>;
template class Graph<double>;
template class ParamSet<float>;
template class ParamSet<double>;
template class Adam<float>;
template class Adam<double>;
template struct ModelParams<float>;
template struct ModelParams<double>;
template struct ShiftNetParams<float>;
template struct ShiftNetParams<double>;
template class DialogueGraph<float>;
template class DialogueGraph<double>;

}  // namespace arcnet
