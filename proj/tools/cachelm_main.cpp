#include <iostream>

int main() {
  std::cerr << "error: not yet implemented\n";
  return 1;
}
