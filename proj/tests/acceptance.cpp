#include <cstdio>
int main() { std::puts("[FAIL] placeholder"); return 1; }
