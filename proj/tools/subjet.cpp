#include <cstdio>

int main() {
  std::puts("subjet: command line not wired up yet");
  return 3;
}
