fn main() {
    // placeholder; the CLI lands with the io module
}
