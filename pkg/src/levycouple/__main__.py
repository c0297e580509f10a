from levycouple.cli import main

main()
