fn main() {
    todo!("cli entry point");
}
