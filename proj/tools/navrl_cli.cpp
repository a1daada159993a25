#include <cstdio>
int main() { std::puts("navrl cli placeholder"); return 0; }
