robot.express("happy")
robot.express("sad")
robot.express("angry")
robot.express("surprised")
robot.express("afraid")
robot.express("disgusted")
robot.express("neutral")
robot.express("love")
robot.express("sleepy")
robot.express("confused")
robot.express("excited")
